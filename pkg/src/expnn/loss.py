"""Asymmetric squared loss, penalized empirical risk, and analytic gradients.

The loss at expectile level tau is

    L_tau(y, f) = (1 - tau) * (y - f)^2   if y <  f
                  tau       * (y - f)^2   if y >= f

which is continuously differentiable in f (both branches meet with value and
slope 0 at y = f). The penalized risk over n samples adds a ridge term on the
weight matrices only:

    R = (1/n) * sum_i L_tau(y_i, f(x_i)) + lam * (||w1||^2 + ||w2||^2)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DimensionError
from .model import EnnConfig, ModelParams, _check_batch, _forward_parts, activation


def _check_tau(tau: float) -> float:
    if not (0.0 < tau < 1.0):
        raise ConfigError(f"tau must lie strictly inside (0, 1), got {tau}")
    return float(tau)


def loss_tau(tau: float, y: float, f: float) -> float:
    """Asymmetric squared loss of a single (response, prediction) pair."""
    tau = _check_tau(tau)
    r = y - f
    w = (1.0 - tau) if y < f else tau
    return w * r * r


def loss_tau_df(tau: float, y: float, f: float) -> float:
    """Derivative of loss_tau with respect to the prediction f.

    Equals 2*(1-tau)*(f-y) on the y < f branch and 2*tau*(f-y) otherwise;
    both one-sided derivatives vanish at y = f.
    """
    tau = _check_tau(tau)
    w = (1.0 - tau) if y < f else tau
    return 2.0 * w * (f - y)


@dataclass(frozen=True)
class RiskValue:
    """Penalized empirical risk split into its two non-negative parts."""

    empirical: float
    penalty: float
    total: float = field(init=False)

    def __post_init__(self):
        if not (self.empirical >= 0.0) or not (self.penalty >= 0.0):
            raise DataError(
                f"risk components must be non-negative, got empirical={self.empirical}, "
                f"penalty={self.penalty}"
            )
        object.__setattr__(self, "total", self.empirical + self.penalty)


@dataclass(frozen=True)
class Gradient:
    """Gradient of RiskValue.total, block for block the shape of ModelParams."""

    d_w1: np.ndarray
    d_b1: np.ndarray
    d_w2: np.ndarray
    d_b2: float

    def max_abs(self) -> float:
        """Infinity norm over every entry."""
        return max(
            float(np.max(np.abs(self.d_w1))),
            float(np.max(np.abs(self.d_b1))),
            float(np.max(np.abs(self.d_w2))),
            abs(self.d_b2),
        )


def _check_xy(p, X, y):
    X = _check_batch(p, X)
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DimensionError("y must be a 1-d vector", expected="1-d", actual=y.shape)
    if y.shape[0] != X.shape[0]:
        raise DimensionError("y length must match the number of rows in X",
                             expected=X.shape[0], actual=y.shape[0])
    if X.shape[0] == 0:
        raise DataError("empty dataset: the risk needs at least one sample")
    return X, y


def _risk_grad_raw(w1, b1, w2, b2, tau, lam, hidden_activation, output_activation, X, y):
    """Single forward/backward pass. Returns (empirical, penalty, dw1, db1, dw2, db2).

    ReLU uses the subgradient-at-zero = 0 convention throughout.
    """
    n = X.shape[0]
    _, f1d = activation(hidden_activation)
    _, f2d = activation(output_activation)
    Z, H, U, yhat = _forward_parts(w1, b1, w2, b2, hidden_activation, output_activation, X)

    r = y - yhat
    w = np.where(y < yhat, 1.0 - tau, tau)
    empirical = float(np.mean(w * r * r))
    penalty = float(lam * (np.sum(w1 * w1) + np.sum(w2 * w2)))

    # dR/dyhat_i = 2 * w_i * (yhat_i - y_i) / n, then back through the layers
    dyhat = 2.0 * w * (yhat - y) / n
    dU = dyhat * f2d(U)
    d_w2 = H.T @ dU + 2.0 * lam * w2
    d_b2 = float(np.sum(dU))
    dZ = dU[:, None] * w2[None, :] * f1d(Z)
    d_w1 = X.T @ dZ + 2.0 * lam * w1
    d_b1 = dZ.sum(axis=0)
    return empirical, penalty, d_w1, d_b1, d_w2, d_b2


def risk(params: ModelParams, cfg: EnnConfig, X, y) -> RiskValue:
    """Penalized empirical risk of the model on (X, y)."""
    X, y = _check_xy(params.p, X, y)
    Z, H, U, yhat = _forward_parts(
        params.w1, params.b1, params.w2, params.b2,
        cfg.hidden_activation, cfg.output_activation, X,
    )
    r = y - yhat
    w = np.where(y < yhat, 1.0 - cfg.tau, cfg.tau)
    empirical = float(np.mean(w * r * r))
    penalty = float(cfg.lam * (np.sum(params.w1 * params.w1) + np.sum(params.w2 * params.w2)))
    return RiskValue(empirical=empirical, penalty=penalty)


def risk_and_gradient(params: ModelParams, cfg: EnnConfig, X, y):
    """Risk and its exact analytic gradient in one backpropagation pass."""
    X, y = _check_xy(params.p, X, y)
    empirical, penalty, d_w1, d_b1, d_w2, d_b2 = _risk_grad_raw(
        params.w1, params.b1, params.w2, params.b2,
        cfg.tau, cfg.lam, cfg.hidden_activation, cfg.output_activation, X, y,
    )
    grad = Gradient(d_w1=d_w1, d_b1=d_b1, d_w2=d_w2, d_b2=d_b2)
    if not (np.isfinite(grad.d_w1).all() and np.isfinite(grad.d_b1).all()
            and np.isfinite(grad.d_w2).all() and np.isfinite(d_b2)):
        raise DataError("gradient contains non-finite values")
    return RiskValue(empirical=empirical, penalty=penalty), grad


def risk_gradient(params: ModelParams, cfg: EnnConfig, X, y) -> Gradient:
    """Exact gradient of risk(...).total with respect to every parameter."""
    return risk_and_gradient(params, cfg, X, y)[1]


@dataclass(frozen=True)
class BlockCheck:
    """Result of comparing one parameter block against finite differences."""

    max_rel_error: float
    worst_index: tuple
    flagged: tuple  # entries beyond tol: (index, analytic, numeric, rel_error)


@dataclass(frozen=True)
class GradientCheckReport:
    blocks: dict
    step: float
    tol: float

    @property
    def passed(self) -> bool:
        return all(len(b.flagged) == 0 for b in self.blocks.values())

    @property
    def max_rel_error(self) -> float:
        return max(b.max_rel_error for b in self.blocks.values())

    def summary(self) -> str:
        lines = []
        for name, b in self.blocks.items():
            status = "ok" if not b.flagged else f"{len(b.flagged)} flagged"
            lines.append(f"{name}: max_rel_error={b.max_rel_error:.3e} ({status})")
        lines.append(f"result: {'PASS' if self.passed else 'FAIL'} (step={self.step}, tol={self.tol})")
        return "\n".join(lines)


def _rel_error(a: float, b: float, floor: float = 1e-10) -> float:
    scale = max(abs(a), abs(b))
    if scale <= floor:
        return 0.0
    return abs(a - b) / scale


def check_gradient(params: ModelParams, cfg: EnnConfig, X, y,
                   step: float = 1e-6, tol: float = 1e-5) -> GradientCheckReport:
    """Compare the analytic gradient against central finite differences of the
    risk, entry by entry. Inputs are never mutated; failures are reported, not
    raised."""
    if not (step > 0.0):
        raise ConfigError(f"step must be positive, got {step}")
    X, y = _check_xy(params.p, X, y)
    analytic = risk_gradient(params, cfg, X, y)

    arrays = {
        "w1": np.array(params.w1),
        "b1": np.array(params.b1),
        "w2": np.array(params.w2),
        "b2": np.array([params.b2]),
    }

    def total_at(blocks):
        empirical, penalty, *_ = _risk_grad_raw(
            blocks["w1"], blocks["b1"], blocks["w2"], float(blocks["b2"][0]),
            cfg.tau, cfg.lam, cfg.hidden_activation, cfg.output_activation, X, y,
        )
        return empirical + penalty

    grads = {
        "w1": analytic.d_w1,
        "b1": analytic.d_b1,
        "w2": analytic.d_w2,
        "b2": np.array([analytic.d_b2]),
    }
    blocks = {}
    for name, arr in arrays.items():
        worst = 0.0
        worst_index = ()
        flagged = []
        for idx in np.ndindex(arr.shape):
            bumped = {k: (v if k != name else v.copy()) for k, v in arrays.items()}
            bumped[name][idx] = arr[idx] + step
            fp = total_at(bumped)
            bumped[name][idx] = arr[idx] - step
            fm = total_at(bumped)
            numeric = (fp - fm) / (2.0 * step)
            a = float(grads[name][idx])
            rel = _rel_error(a, numeric)
            if rel > worst:
                worst, worst_index = rel, idx
            if rel > tol:
                flagged.append((idx, a, numeric, rel))
        blocks[name] = BlockCheck(max_rel_error=worst, worst_index=worst_index,
                                  flagged=tuple(flagged))
    return GradientCheckReport(blocks=blocks, step=step, tol=tol)

"""Parameter initialization and quasi-Newton training.

The minimizer is a limited-memory BFGS with Armijo backtracking. It works on a
flat parameter vector, which keeps the update rules independent of the network
layout and makes frozen-parameter fits (transfer learning) a matter of masking.

Two conventions matter for reproducibility:

* The very first descent direction, and any direction taken while the
  curvature history is empty, is -g / ||g||_2. Normalizing makes the whole
  trajectory invariant to rescaling the objective by a power of two, so fits
  of proportional objectives follow identical paths.
* An iteration means one accepted line-search step. Trial points rejected by
  the Armijo test do not count.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, OptimizationError
from .loss import RiskValue, _check_xy, _risk_grad_raw, risk
from .model import EnnConfig, ModelParams

TERMINATION_GRAD_TOL = "grad_tol"
TERMINATION_MAX_EPOCHS = "max_epochs"
TERMINATION_LINE_SEARCH = "line_search_failure"
TERMINATIONS = (TERMINATION_GRAD_TOL, TERMINATION_MAX_EPOCHS, TERMINATION_LINE_SEARCH)

_ARMIJO_C1 = 1e-4
_ARMIJO_SHRINK = 0.5
_MAX_HALVINGS = 50
_HISTORY_SIZE = 10
_CURVATURE_SKIP = 1e-10


@dataclass(frozen=True)
class FreezeSpec:
    """Which parameter blocks stay fixed during a fit."""

    freeze_w1: bool = False
    freeze_b1: bool = False
    freeze_w2: bool = False
    freeze_b2: bool = False

    @classmethod
    def none(cls) -> "FreezeSpec":
        return cls()

    @classmethod
    def first_layer(cls) -> "FreezeSpec":
        """Freeze the input-to-hidden map (weights and biases)."""
        return cls(freeze_w1=True, freeze_b1=True)

    @classmethod
    def everything(cls) -> "FreezeSpec":
        return cls(freeze_w1=True, freeze_b1=True, freeze_w2=True, freeze_b2=True)

    @property
    def any_frozen(self) -> bool:
        return self.freeze_w1 or self.freeze_b1 or self.freeze_w2 or self.freeze_b2

    @property
    def all_frozen(self) -> bool:
        return self.freeze_w1 and self.freeze_b1 and self.freeze_w2 and self.freeze_b2

    def free_mask(self, p: int, q: int) -> np.ndarray:
        """Flat boolean mask in flatten_params order; True marks a free entry."""
        return np.concatenate([
            np.full(p * q, not self.freeze_w1),
            np.full(q, not self.freeze_b1),
            np.full(q, not self.freeze_w2),
            np.full(1, not self.freeze_b2),
        ])


def flatten_params(params: ModelParams) -> np.ndarray:
    """Pack parameters into one vector: w1 row-major, then b1, w2, b2."""
    return np.concatenate([
        params.w1.ravel(), params.b1, params.w2, np.array([params.b2]),
    ])


def _split_flat(x: np.ndarray, p: int, q: int):
    if x.shape != (p * q + 2 * q + 1,):
        raise DimensionError("flat parameter vector has the wrong length",
                             expected=p * q + 2 * q + 1, actual=x.shape)
    w1 = x[: p * q].reshape(p, q)
    b1 = x[p * q: p * q + q]
    w2 = x[p * q + q: p * q + 2 * q]
    b2 = float(x[-1])
    return w1, b1, w2, b2


def unflatten_params(x: np.ndarray, p: int, q: int) -> ModelParams:
    """Inverse of flatten_params."""
    w1, b1, w2, b2 = _split_flat(np.asarray(x, dtype=float), p, q)
    return ModelParams(w1=w1, b1=b1, w2=w2, b2=b2)


def init_params(p: int, cfg: EnnConfig) -> ModelParams:
    """Glorot-uniform weights, zero biases.

    Each weight matrix is drawn from U(-s, s) with s = sqrt(6 / (fan_in +
    fan_out)); the first layer is drawn before the second, so the stream of
    random numbers for a given seed is fixed.
    """
    if p < 1:
        raise ConfigError(f"p must be at least 1, got {p}")
    q = cfg.hidden_units
    rng = np.random.default_rng(cfg.seed)
    s1 = math.sqrt(6.0 / (p + q))
    s2 = math.sqrt(6.0 / (q + 1))
    w1 = rng.uniform(-s1, s1, size=(p, q))
    w2 = rng.uniform(-s2, s2, size=q)
    return ModelParams(w1=w1, b1=np.zeros(q), w2=w2, b2=0.0)


@dataclass(frozen=True)
class VectorResult:
    """Outcome of minimize_vector."""

    x: np.ndarray
    value: float
    grad: np.ndarray
    iterations: int
    termination: str
    trace: tuple  # objective value at the initial point and each accepted step


@dataclass(frozen=True)
class OptimReport:
    """Outcome of a model fit."""

    params: ModelParams
    risk: RiskValue
    grad_inf_norm: float
    iterations: int
    termination: str
    trace: tuple


def _two_loop_direction(g: np.ndarray, history) -> np.ndarray:
    if not history:
        return -g / float(np.linalg.norm(g))
    q = np.array(g)
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * float(np.dot(s, q))
        alphas.append(a)
        q = q - a * y
    s_last, y_last, _ = history[-1]
    gamma = float(np.dot(s_last, y_last)) / float(np.dot(y_last, y_last))
    r = gamma * q
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * float(np.dot(y, r))
        r = r + s * (a - b)
    return -r


def minimize_vector(value_and_grad, x0, *, grad_tolerance: float, max_iter: int,
                    free_mask=None, callback=None) -> VectorResult:
    """L-BFGS with Armijo backtracking on a flat vector.

    value_and_grad(x) must return (value, gradient). Entries where free_mask
    is False are held at their initial values exactly: their gradient and
    direction components are zeroed, so no step ever moves them. callback, if
    given, is invoked as callback(iteration, x, value) at the initial point
    (iteration 0) and after every accepted step.

    The loop stops when the gradient infinity norm reaches grad_tolerance,
    when max_iter steps have been accepted, or when 50 halvings of the step
    cannot satisfy the Armijo condition.
    """
    if grad_tolerance < 0.0:
        raise ConfigError(f"grad_tolerance must be non-negative, got {grad_tolerance}")
    if max_iter < 0:
        raise ConfigError(f"max_iter must be non-negative, got {max_iter}")
    x = np.array(x0, dtype=float)
    if x.ndim != 1:
        raise DimensionError("x0 must be a flat vector", expected="1-d", actual=x.shape)
    if free_mask is not None:
        free_mask = np.asarray(free_mask, dtype=bool)
        if free_mask.shape != x.shape:
            raise DimensionError("free_mask must match x0", expected=x.shape,
                                 actual=free_mask.shape)

    def evaluate(z):
        f, g = value_and_grad(z)
        g = np.asarray(g, dtype=float)
        if free_mask is not None:
            g = np.where(free_mask, g, 0.0)
        return float(f), g

    f, g = evaluate(x)
    if not np.isfinite(f) or not np.isfinite(g).all():
        raise OptimizationError(
            "objective or gradient is not finite at the initial point", iteration=0)
    trace = [f]
    if callback is not None:
        callback(0, x.copy(), f)

    history = deque(maxlen=_HISTORY_SIZE)
    k = 0
    while True:
        if float(np.max(np.abs(g))) <= grad_tolerance:
            termination = TERMINATION_GRAD_TOL
            break
        if k >= max_iter:
            termination = TERMINATION_MAX_EPOCHS
            break
        d = _two_loop_direction(g, history)
        if free_mask is not None:
            d = np.where(free_mask, d, 0.0)
        slope = float(np.dot(g, d))
        if slope >= 0.0:
            # Stale curvature produced a non-descent direction; restart from
            # normalized steepest descent.
            history.clear()
            d = -g / float(np.linalg.norm(g))
            if free_mask is not None:
                d = np.where(free_mask, d, 0.0)
            slope = float(np.dot(g, d))
        alpha = 1.0
        accepted = False
        for _ in range(_MAX_HALVINGS + 1):
            x_trial = x + alpha * d
            f_trial, g_trial = evaluate(x_trial)
            if np.isfinite(f_trial) and f_trial <= f + _ARMIJO_C1 * alpha * slope:
                accepted = True
                break
            alpha *= _ARMIJO_SHRINK
        if not accepted:
            termination = TERMINATION_LINE_SEARCH
            break
        if not np.isfinite(g_trial).all():
            raise OptimizationError(
                "gradient is not finite at an accepted iterate", iteration=k + 1)
        s = x_trial - x
        y = g_trial - g
        sy = float(np.dot(s, y))
        if sy > _CURVATURE_SKIP * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            history.append((s, y, 1.0 / sy))
        x, f, g = x_trial, f_trial, g_trial
        k += 1
        trace.append(f)
        if callback is not None:
            callback(k, x.copy(), f)
    return VectorResult(x=x, value=f, grad=g, iterations=k,
                        termination=termination, trace=tuple(trace))


def minimize(cfg: EnnConfig, X, y, init: ModelParams = None,
             freeze: FreezeSpec = None, callback=None) -> OptimReport:
    """Fit an expectile network to (X, y) under the given configuration.

    init defaults to init_params(p, cfg). freeze holds the named blocks at
    their initial values. The report carries the final parameters, the risk
    split into empirical and penalty parts, and the per-step objective trace.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X must be a 2-d design matrix", expected="2-d",
                             actual=X.shape)
    p = init.p if init is not None else X.shape[1]
    X, y = _check_xy(p, X, y)
    if init is None:
        init = init_params(p, cfg)
    if init.q != cfg.hidden_units:
        raise ConfigError(
            f"init has {init.q} hidden units but the config asks for {cfg.hidden_units}")
    q = init.q
    tau, lam = cfg.tau, cfg.lam
    hidden_act, output_act = cfg.hidden_activation, cfg.output_activation

    def value_and_grad(z):
        w1, b1, w2, b2 = _split_flat(z, p, q)
        empirical, penalty, d_w1, d_b1, d_w2, d_b2 = _risk_grad_raw(
            w1, b1, w2, b2, tau, lam, hidden_act, output_act, X, y)
        grad = np.concatenate([d_w1.ravel(), d_b1, d_w2, np.array([d_b2])])
        return empirical + penalty, grad

    mask = None
    if freeze is not None and freeze.any_frozen:
        mask = freeze.free_mask(p, q)
    result = minimize_vector(value_and_grad, flatten_params(init),
                             grad_tolerance=cfg.grad_tolerance,
                             max_iter=cfg.max_epochs,
                             free_mask=mask, callback=callback)
    params = unflatten_params(result.x, p, q)
    return OptimReport(params=params,
                       risk=risk(params, cfg, X, y),
                       grad_inf_norm=float(np.max(np.abs(result.grad))),
                       iterations=result.iterations,
                       termination=result.termination,
                       trace=result.trace)

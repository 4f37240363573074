"""Single-hidden-layer expectile network: parameters, forward pass, JSON round-trip.

The network maps a covariate vector x (length p) to a scalar prediction

    yhat = f2( sum_q f1( sum_p x_p * w1[p,q] + b1[q] ) * w2[q] + b2 )

where f1 is the hidden activation and f2 the output activation. Trained under
the asymmetric squared loss, yhat estimates the conditional tau-expectile of
the response. Inputs are not augmented with a constant column; the bias terms
b1 and b2 carry the intercept.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DimensionError

MODEL_SCHEMA_VERSION = 1

HIDDEN_ACTIVATIONS = ("relu", "sigmoid", "tanh", "identity")
OUTPUT_ACTIVATIONS = ("identity", "relu", "sigmoid")


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_deriv(z):
    # subgradient at exactly 0 is taken as 0
    return (z > 0.0).astype(float)


def _sigmoid(z):
    # overflow-safe split: exp of a non-positive argument only
    e = np.exp(-np.abs(z))
    return np.where(z >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def _sigmoid_deriv(z):
    s = _sigmoid(z)
    return s * (1.0 - s)


def _tanh_deriv(z):
    t = np.tanh(z)
    return 1.0 - t * t


def _identity(z):
    return z


def _identity_deriv(z):
    return np.ones_like(z)


ACTIVATIONS = {
    "relu": (_relu, _relu_deriv),
    "sigmoid": (_sigmoid, _sigmoid_deriv),
    "tanh": (np.tanh, _tanh_deriv),
    "identity": (_identity, _identity_deriv),
}


def activation(name):
    """Return the (function, derivative) pair registered under ``name``."""
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ConfigError(
            f"unknown activation {name!r}; known: {sorted(ACTIVATIONS)}"
        ) from None


@dataclass(frozen=True)
class EnnConfig:
    """Model and training configuration.

    Arguments
    ---------
    tau : expectile level, strictly inside (0, 1). 0.5 recovers the
        mean-regression network (up to a constant factor in the risk).
    lam : ridge penalty strength on the weight matrices (biases unpenalized).
    hidden_units : number of hidden nodes.
    hidden_activation : one of {"relu", "sigmoid", "tanh", "identity"};
        identity collapses the network to an affine map, the linear sub-case.
    output_activation : one of {"identity", "relu", "sigmoid"}.
    max_epochs : iteration cap for the full-batch quasi-Newton optimizer.
    grad_tolerance : stop when the gradient infinity-norm falls below this.
    seed : seed for weight initialization (64-bit unsigned).
    """

    tau: float = 0.5
    lam: float = 0.0
    hidden_units: int = 5
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    max_epochs: int = 1000
    grad_tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.tau < 1.0):
            raise ConfigError(f"tau must lie strictly inside (0, 1), got {self.tau}")
        if not (self.lam >= 0.0):
            raise ConfigError(f"lam must be non-negative, got {self.lam}")
        if int(self.hidden_units) != self.hidden_units or self.hidden_units < 1:
            raise ConfigError(f"hidden_units must be a positive integer, got {self.hidden_units}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ConfigError(
                f"hidden_activation {self.hidden_activation!r} not in {HIDDEN_ACTIVATIONS}"
            )
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ConfigError(
                f"output_activation {self.output_activation!r} not in {OUTPUT_ACTIVATIONS}"
            )
        if int(self.max_epochs) != self.max_epochs or self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be a positive integer, got {self.max_epochs}")
        if not (self.grad_tolerance > 0.0):
            raise ConfigError(f"grad_tolerance must be positive, got {self.grad_tolerance}")
        if int(self.seed) != self.seed or not (0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class ModelParams:
    """All network parameters. Immutable after construction; the arrays are
    copied in and marked read-only, so instances are safe to share.

    w1 : (p, q) input-to-hidden weights
    b1 : (q,) hidden biases
    w2 : (q,) hidden-to-output weights
    b2 : scalar output bias
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    def __post_init__(self):
        w1 = np.array(self.w1, dtype=float)
        b1 = np.array(self.b1, dtype=float)
        w2 = np.array(self.w2, dtype=float)
        b2 = float(self.b2)
        if w1.ndim != 2 or w1.shape[0] < 1 or w1.shape[1] < 1:
            raise DimensionError("w1 must be a p x q matrix", expected="2-d", actual=w1.shape)
        q = w1.shape[1]
        if b1.shape != (q,):
            raise DimensionError("b1 length must match hidden width", expected=(q,), actual=b1.shape)
        if w2.shape != (q,):
            raise DimensionError("w2 length must match hidden width", expected=(q,), actual=w2.shape)
        if not (np.isfinite(w1).all() and np.isfinite(b1).all() and np.isfinite(w2).all() and np.isfinite(b2)):
            raise DataError("model parameters contain non-finite values")
        for arr in (w1, b1, w2):
            arr.setflags(write=False)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", b2)

    @property
    def p(self) -> int:
        return self.w1.shape[0]

    @property
    def q(self) -> int:
        return self.w1.shape[1]


def param_count(params: ModelParams) -> int:
    """Total number of free parameters: p*q + q + q + 1."""
    return params.p * params.q + 2 * params.q + 1


def _forward_parts(w1, b1, w2, b2, hidden_activation, output_activation, X):
    """One forward pass over a batch, keeping the intermediates needed for
    backpropagation. Returns (Z, H, U, yhat) with Z = X @ w1 + b1 the hidden
    pre-activations, H = f1(Z), U = H @ w2 + b2 the output pre-activations."""
    f1, _ = activation(hidden_activation)
    f2, _ = activation(output_activation)
    Z = X @ w1 + b1
    H = f1(Z)
    U = H @ w2 + b2
    return Z, H, U, f2(U)


def _check_batch(p, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X must be a 2-d matrix", expected="2-d", actual=X.shape)
    if X.shape[1] != p:
        raise DimensionError("X column count must match the model input size",
                             expected=p, actual=X.shape[1])
    return X


def forward_batch(params: ModelParams, cfg: EnnConfig, X) -> np.ndarray:
    """Predictions for every row of X (shape n x p). Rows are independent;
    an empty batch yields an empty vector."""
    X = _check_batch(params.p, X)
    _, _, _, yhat = _forward_parts(
        params.w1, params.b1, params.w2, params.b2,
        cfg.hidden_activation, cfg.output_activation, X,
    )
    return yhat


def forward(params: ModelParams, cfg: EnnConfig, x) -> float:
    """Prediction for a single covariate vector of length p."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != params.p:
        raise DimensionError("input vector length must match the model input size",
                             expected=params.p, actual=x.shape)
    return float(forward_batch(params, cfg, x[None, :])[0])


def save_model(path, params: ModelParams, cfg: EnnConfig, training_meta=None) -> None:
    """Write the model as a single JSON document. Floats use the shortest
    round-trip representation, so load_model restores them bit-exactly."""
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "p": params.p,
        "q": params.q,
        "tau": cfg.tau,
        "lambda": cfg.lam,
        "hidden_activation": cfg.hidden_activation,
        "output_activation": cfg.output_activation,
        "w1": [list(row) for row in params.w1],
        "b1": list(params.b1),
        "w2": list(params.w2),
        "b2": params.b2,
        "training_meta": dict(training_meta or {}),
    }
    out = Path(path)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class LoadedModel:
    params: ModelParams
    config: EnnConfig
    training_meta: dict


def load_model(path) -> LoadedModel:
    """Read a model JSON document written by save_model.

    The returned config carries the persisted fields (tau, lambda,
    activations, hidden width); optimizer settings take their defaults.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    version = doc.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise DataError(f"unsupported model schema_version {version!r}")
    try:
        params = ModelParams(
            w1=np.array(doc["w1"], dtype=float),
            b1=np.array(doc["b1"], dtype=float),
            w2=np.array(doc["w2"], dtype=float),
            b2=float(doc["b2"]),
        )
        cfg = EnnConfig(
            tau=float(doc["tau"]),
            lam=float(doc["lambda"]),
            hidden_units=int(doc["q"]),
            hidden_activation=doc["hidden_activation"],
            output_activation=doc["output_activation"],
        )
    except KeyError as exc:
        raise DataError(f"model file {path} is missing field {exc}") from exc
    if params.p != int(doc["p"]) or params.q != int(doc["q"]):
        raise DataError(f"model file {path}: declared p/q disagree with array shapes")
    return LoadedModel(params=params, config=cfg, training_meta=doc.get("training_meta", {}))

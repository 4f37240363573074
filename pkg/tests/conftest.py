"""Shared test helpers: reference implementations written independently of
the package internals, finite-difference utilities, and instance builders."""
import numpy as np
import pytest

import expnn


# ---------------------------------------------------------------------------
# Reference forward pass and risk, straight from the defining formulas.
# ---------------------------------------------------------------------------

def ref_act(name, z):
    z = np.asarray(z, dtype=float)
    if name == "relu":
        return np.where(z > 0.0, z, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "tanh":
        return np.tanh(z)
    if name == "identity":
        return z
    raise ValueError(name)


def ref_forward(w1, b1, w2, b2, hidden, output, X):
    X = np.asarray(X, dtype=float)
    H = ref_act(hidden, X @ w1 + b1)
    return ref_act(output, H @ w2 + b2)


def ref_loss(tau, y, f):
    if y < f:
        return (1.0 - tau) * (y - f) ** 2
    return tau * (y - f) ** 2


def ref_risk(w1, b1, w2, b2, tau, lam, hidden, output, X, y):
    f = ref_forward(w1, b1, w2, b2, hidden, output, X)
    emp = sum(ref_loss(tau, yi, fi) for yi, fi in zip(y, f)) / len(y)
    pen = lam * (float(np.sum(np.square(w1))) + float(np.sum(np.square(w2))))
    return emp + pen


def ref_risk_flat(theta, p, q, tau, lam, hidden, output, X, y):
    w1 = theta[: p * q].reshape(p, q)
    b1 = theta[p * q: p * q + q]
    w2 = theta[p * q + q: p * q + 2 * q]
    b2 = float(theta[-1])
    return ref_risk(w1, b1, w2, b2, tau, lam, hidden, output, X, y)


def fd_gradient(func, x, step=1e-6):
    """Central finite differences of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xp[i] += step
        xm = x.copy()
        xm[i] -= step
        g[i] = (func(xp) - func(xm)) / (2.0 * step)
    return g


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------

def random_instance(rng, n=8, p=3, q=3, hidden="tanh", output="identity",
                    tau=0.5, lam=0.0, **cfg_kwargs):
    X = rng.normal(0.0, 1.0, (n, p))
    y = rng.normal(0.0, 1.0, n)
    params = expnn.ModelParams(
        w1=rng.normal(0.0, 0.8, (p, q)),
        b1=rng.normal(0.0, 0.5, q),
        w2=rng.normal(0.0, 0.8, q),
        b2=float(rng.normal(0.0, 0.5)),
    )
    cfg = expnn.EnnConfig(tau=tau, lam=lam, hidden_units=q,
                          hidden_activation=hidden, output_activation=output,
                          **cfg_kwargs)
    return params, cfg, X, y


def kink_adjacent(params, cfg, X, y, f_tol=1e-4, z_tol=1e-4):
    """True when finite differences would straddle a non-smooth point: a
    residual near the loss kink, or a pre-activation near a relu corner."""
    Z = X @ params.w1 + params.b1
    H = ref_act(cfg.hidden_activation, Z)
    U = H @ params.w2 + params.b2
    yhat = ref_act(cfg.output_activation, U)
    if np.min(np.abs(np.asarray(y) - yhat)) < f_tol:
        return True
    if cfg.hidden_activation == "relu" and np.min(np.abs(Z)) < z_tol:
        return True
    if cfg.output_activation == "relu" and np.min(np.abs(U)) < z_tol:
        return True
    return False


@pytest.fixture
def rng():
    return np.random.default_rng(20240815)

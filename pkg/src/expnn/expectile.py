"""Closed-form expectile references: scalar expectiles and linear expectile
regression. These are deliberately independent of the network code so they can
serve as ground truth for it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError


def _check_tau(tau: float) -> float:
    if not (0.0 < tau < 1.0):
        raise ConfigError(f"tau must lie strictly inside (0, 1), got {tau}")
    return float(tau)


def scalar_expectile(y, tau: float, tol: float = 1e-10, max_iter: int = 10000) -> float:
    """The tau-expectile of a sample, by fixed-point iteration.

    mu is the unique minimizer of sum_i L_tau(y_i, mu). Setting the derivative
    to zero gives the weighted-mean fixed point

        mu = [tau * sum_{y_i >= mu} y_i + (1 - tau) * sum_{y_i < mu} y_i]
             / [tau * #{y_i >= mu} + (1 - tau) * #{y_i < mu}]

    which converges monotonically from the mean. tau = 0.5 returns the mean.
    """
    tau = _check_tau(tau)
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        raise DataError("scalar_expectile needs at least one observation")
    if not np.isfinite(y).all():
        raise DataError("scalar_expectile requires finite observations")
    mu = float(np.mean(y))
    for _ in range(max_iter):
        above = y >= mu
        w = np.where(above, tau, 1.0 - tau)
        new_mu = float(np.sum(w * y) / np.sum(w))
        if abs(new_mu - mu) <= tol:
            return new_mu
        mu = new_mu
    raise DataError(f"scalar_expectile did not converge within {max_iter} iterations")


@dataclass(frozen=True)
class ExpectileSolution:
    """Fitted linear expectile model: f(x) = intercept + x @ coef."""

    intercept: float
    coef: np.ndarray
    iterations: int
    converged: bool

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        return self.intercept + X @ self.coef


def linear_expectile_fit(X, y, tau: float, lam: float = 0.0,
                         tol: float = 1e-10, max_iter: int = 1000) -> ExpectileSolution:
    """Linear expectile regression by iteratively reweighted least squares.

    Minimizes (1/n) sum_i L_tau(y_i, b0 + x_i @ beta) + lam * ||beta||^2,
    leaving the intercept unpenalized. Each round solves the weighted normal
    equations with weights tau (residual >= 0) or 1 - tau (residual < 0);
    convergence is declared when the coefficient vector moves by at most tol
    in the infinity norm. With tau = 0.5 the first solve is already ordinary
    (ridge) least squares, so the loop exits immediately.
    """
    tau = _check_tau(tau)
    if lam < 0.0:
        raise ConfigError(f"lam must be non-negative, got {lam}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise DataError(f"X must be 2-d, got shape {X.shape}")
    n, p = X.shape
    if y.shape[0] != n:
        raise DataError(f"y has {y.shape[0]} entries but X has {n} rows")
    if n == 0:
        raise DataError("linear_expectile_fit needs at least one observation")

    A = np.hstack([np.ones((n, 1)), X])
    D = np.eye(p + 1)
    D[0, 0] = 0.0  # intercept stays unpenalized

    def solve(weights):
        WA = A * weights[:, None]
        lhs = (A.T @ WA) / n + lam * D
        rhs = (A.T @ (weights * y)) / n
        try:
            return np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError:
            raise DataError(
                "normal equations are singular; the design is rank deficient "
                "(consider lam > 0)"
            )

    beta = solve(np.full(n, 0.5))
    converged = False
    iterations = 1
    for it in range(1, max_iter + 1):
        iterations = it
        resid = y - A @ beta
        weights = np.where(resid >= 0.0, tau, 1.0 - tau)
        new_beta = solve(weights)
        if float(np.max(np.abs(new_beta - beta))) <= tol:
            beta = new_beta
            converged = True
            break
        beta = new_beta
    if not converged:
        raise DataError(f"linear_expectile_fit did not converge within {max_iter} iterations")
    return ExpectileSolution(intercept=float(beta[0]), coef=beta[1:].copy(),
                             iterations=iterations, converged=converged)

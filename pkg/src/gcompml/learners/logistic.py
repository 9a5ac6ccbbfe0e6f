"""Unpenalized logistic regression by iteratively reweighted least squares."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.special import expit

from ..errors import DegenerateOutcome

SEPARATION_BOUND = 30.0


def irls(z: np.ndarray, y: np.ndarray, tol: float = 1e-8, max_iter: int = 100):
    """Maximum-likelihood logistic fit with an intercept.

    Returns ``(intercept, coef, n_iter, converged, separated)``.  Separation is
    reported when the fit stalls with some ``|coef| > 30``.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.all(y == y[0]):
        raise DegenerateOutcome("outcome is constant")
    x1 = np.hstack([np.ones((len(y), 1)), z])
    theta = np.zeros(x1.shape[1])
    ybar = y.mean()
    theta[0] = np.log(ybar / (1 - ybar))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(x1 @ theta)
        w = np.maximum(p * (1 - p), 1e-12)
        grad = x1.T @ (y - p)
        hess = (x1 * w[:, None]).T @ x1
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        theta = theta + step
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    separated = bool(np.max(np.abs(theta[1:]), initial=0.0) > SEPARATION_BOUND
                     or np.abs(theta[0]) > SEPARATION_BOUND)
    if separated:
        warnings.warn("logistic fit shows signs of separation (|coef| > 30)", RuntimeWarning,
                      stacklevel=2)
    return float(theta[0]), theta[1:].copy(), it, converged, separated

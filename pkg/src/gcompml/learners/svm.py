"""RBF-kernel soft-margin SVM (SMO) with Platt-scaled probabilities."""

from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import DegenerateOutcome


@njit(cache=True)
def rbf_kernel(u, v, gamma):
    nu, nv = u.shape[0], v.shape[0]
    k = np.empty((nu, nv))
    for i in range(nu):
        for j in range(nv):
            s = 0.0
            for d in range(u.shape[1]):
                diff = u[i, d] - v[j, d]
                s += diff * diff
            k[i, j] = np.exp(-gamma * s)
    return k


@njit(cache=True)
def _smo(kmat, ys, cost, eps, max_iter):
    """Second-order working-set SMO for the C-SVC dual.

    ``ys`` holds labels in {-1, +1}.  Returns ``(alpha, rho, n_iter, converged)``;
    decision values are ``sum_i alpha_i ys_i K(x_i, x) - rho``.
    """
    n = ys.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - e'a at a = 0
    tau = 1e-12
    it = 0
    converged = False
    while it < max_iter:
        # select i: maximal violating index in I_up
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (ys[t] > 0 and alpha[t] < cost) or (ys[t] < 0 and alpha[t] > 0):
                v = -ys[t] * grad[t]
                if v >= gmax:
                    gmax = v
                    i = t
        gmin = np.inf
        j = -1
        obj_min = np.inf
        for t in range(n):
            if (ys[t] > 0 and alpha[t] > 0) or (ys[t] < 0 and alpha[t] < cost):
                v = -ys[t] * grad[t]
                if v <= gmin:
                    gmin = v
                b = gmax - v
                if i >= 0 and b > 0:
                    a = kmat[i, i] + kmat[t, t] - 2.0 * kmat[i, t]
                    if a <= 0:
                        a = tau
                    o = -(b * b) / a
                    if o <= obj_min:
                        obj_min = o
                        j = t
        if i < 0 or j < 0 or gmax - gmin < eps:
            converged = True
            break
        it += 1
        qii = kmat[i, i]
        qjj = kmat[j, j]
        qij = ys[i] * ys[j] * kmat[i, j]
        old_ai = alpha[i]
        old_aj = alpha[j]
        if ys[i] != ys[j]:
            quad = qii + qjj + 2.0 * qij
            if quad <= 0:
                quad = tau
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > cost:
                    alpha[i] = cost
                    alpha[j] = cost - diff
            else:
                if alpha[j] > cost:
                    alpha[j] = cost
                    alpha[i] = cost + diff
        else:
            quad = qii + qjj - 2.0 * qij
            if quad <= 0:
                quad = tau
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > cost:
                if alpha[i] > cost:
                    alpha[i] = cost
                    alpha[j] = total - cost
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > cost:
                if alpha[j] > cost:
                    alpha[j] = cost
                    alpha[i] = total - cost
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        for t in range(n):
            grad[t] += ys[t] * (ys[i] * kmat[t, i] * dai + ys[j] * kmat[t, j] * daj)
    # bias
    ub = np.inf
    lb = -np.inf
    s = 0.0
    nfree = 0
    for t in range(n):
        yg = ys[t] * grad[t]
        if alpha[t] >= cost:
            if ys[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if ys[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            s += yg
    if nfree > 0:
        rho = s / nfree
    else:
        rho = (ub + lb) / 2.0
    return alpha, rho, it, converged


def dual_objective(kmat, ys, alpha) -> float:
    """Dual value ``sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij`` (to maximize)."""
    ay = alpha * ys
    return float(alpha.sum() - 0.5 * ay @ kmat @ ay)


def smo(kmat, ys, cost: float, eps: float = 1e-3, max_iter: int | None = None):
    kmat = np.ascontiguousarray(kmat, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if max_iter is None:
        max_iter = max(10_000, 100 * len(ys))
    return _smo(kmat, ys, float(cost), float(eps), int(max_iter))


# --------------------------------------------------------------------------
# Platt scaling


def platt_targets(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    n_pos = float(np.sum(labels > 0))
    n_neg = float(len(labels) - n_pos)
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    return np.where(labels > 0, hi, lo)


def platt_objective(a: float, b: float, f: np.ndarray, t: np.ndarray):
    """Negative log-likelihood of ``p = 1 / (1 + exp(a f + b))`` and its gradient."""
    fab = a * f + b
    # t*fab + log(1 + exp(-fab)), stable
    val = np.where(fab >= 0, t * fab + np.log1p(np.exp(-fab)),
                   (t - 1.0) * fab + np.log1p(np.exp(fab)))
    p = np.where(fab >= 0, np.exp(-fab) / (1.0 + np.exp(-fab)), 1.0 / (1.0 + np.exp(fab)))
    d = t - p
    return float(val.sum()), np.array([float(np.sum(f * d)), float(np.sum(d))])


def platt_fit(f: np.ndarray, labels: np.ndarray, max_iter: int = 100,
              min_step: float = 1e-10, sigma: float = 1e-12, eps: float = 1e-5):
    """Fit Platt's sigmoid by Newton's method with backtracking."""
    f = np.asarray(f, dtype=float)
    t = platt_targets(labels)
    n_pos = float(np.sum(np.asarray(labels) > 0))
    n_neg = float(len(f) - n_pos)
    a = 0.0
    b = float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    fval, _ = platt_objective(a, b, f, t)
    for _ in range(max_iter):
        fab = a * f + b
        p = np.where(fab >= 0, np.exp(-fab) / (1.0 + np.exp(-fab)), 1.0 / (1.0 + np.exp(fab)))
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + np.sum(f * f * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(f * d2)
        d1 = t - p
        g1 = np.sum(f * d1)
        g2 = np.sum(d1)
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * da + g2 * db
        step = 1.0
        while step >= min_step:
            na, nb = a + step * da, b + step * db
            nf, _ = platt_objective(na, nb, f, t)
            if nf < fval + 1e-4 * step * gd:
                a, b, fval = na, nb, nf
                break
            step /= 2.0
        else:
            break
    return a, b


def platt_proba(a: float, b: float, f) -> np.ndarray:
    fab = a * np.asarray(f, dtype=float) + b
    return np.where(fab >= 0, np.exp(-fab) / (1.0 + np.exp(-fab)), 1.0 / (1.0 + np.exp(fab)))


# --------------------------------------------------------------------------


def median_gamma(z: np.ndarray) -> float:
    """Kernel width ``1 / median squared distance`` over distinct row pairs."""
    z = np.asarray(z, dtype=float)
    sq = np.sum(z * z, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * z @ z.T
    iu = np.triu_indices(len(z), k=1)
    vals = d2[iu]
    vals = vals[vals > 1e-12]
    if vals.size == 0:
        return 1.0
    return float(1.0 / np.median(vals))


def train(z, y, cost: float, gamma: float, eps: float = 1e-3) -> dict:
    if cost <= 0 or gamma <= 0:
        raise ValueError("cost and gamma must be > 0")
    z = np.ascontiguousarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.all(y == y[0]):
        raise DegenerateOutcome("outcome is constant")
    ys = np.where(y > 0.5, 1.0, -1.0)
    kmat = rbf_kernel(z, z, float(gamma))
    alpha, rho, n_iter, converged = smo(kmat, ys, cost, eps)
    f = (alpha * ys) @ kmat - rho
    a, b = platt_fit(f, ys)
    sv = alpha > 0
    return {"sv": z[sv].copy(), "coef": (alpha * ys)[sv].copy(), "rho": float(rho),
            "gamma": float(gamma), "cost": float(cost), "platt_a": float(a), "platt_b": float(b),
            "n_iter": int(n_iter), "converged": bool(converged)}


def decision(params: dict, z) -> np.ndarray:
    z = np.ascontiguousarray(z, dtype=float)
    sv = np.ascontiguousarray(params["sv"], dtype=float)
    if sv.shape[0] == 0:
        return np.full(z.shape[0], -params["rho"])
    return rbf_kernel(z, sv, params["gamma"]) @ params["coef"] - params["rho"]


def predict(params: dict, z) -> np.ndarray:
    return platt_proba(params["platt_a"], params["platt_b"], decision(params, z))

"""Single-hidden-layer network with logistic units.

Loss is the summed cross-entropy plus ``decay`` times the squared norm of
the non-bias weights.  Training is full-batch gradient descent with an
Armijo backtracking line search.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


@njit(cache=True)
def _forward(z, w1, b1, w2, b2):
    h = _sigmoid(z @ w1 + b1)
    o = h @ w2 + b2
    return h, o


@njit(cache=True)
def _loss(z, y, w1, b1, w2, b2, decay):
    _, o = _forward(z, w1, b1, w2, b2)
    ce = 0.0
    for i in range(o.shape[0]):
        e = o[i]
        # log(1 + exp(e)) - y e, stable
        if e > 0:
            ce += e + np.log1p(np.exp(-e)) - y[i] * e
        else:
            ce += np.log1p(np.exp(e)) - y[i] * e
    return ce + decay * (np.sum(w1 * w1) + np.sum(w2 * w2))


@njit(cache=True)
def _grad(z, y, w1, b1, w2, b2, decay):
    h, o = _forward(z, w1, b1, w2, b2)
    d_o = _sigmoid(o) - y
    g_w2 = h.T @ d_o + 2.0 * decay * w2
    g_b2 = np.sum(d_o)
    d_h = np.outer(d_o, w2) * h * (1.0 - h)
    g_w1 = z.T @ d_h + 2.0 * decay * w1
    g_b1 = d_h.sum(axis=0)
    return g_w1, g_b1, g_w2, g_b2


@njit(cache=True)
def _train(z, y, w1, b1, w2, b2, decay, max_epochs, rel_tol):
    loss = _loss(z, y, w1, b1, w2, b2, decay)
    step = 1.0 / z.shape[0]
    converged = False
    epochs = 0
    for epoch in range(max_epochs):
        epochs = epoch + 1
        g_w1, g_b1, g_w2, g_b2 = _grad(z, y, w1, b1, w2, b2, decay)
        gnorm2 = np.sum(g_w1 * g_w1) + np.sum(g_b1 * g_b1) + np.sum(g_w2 * g_w2) + g_b2 * g_b2
        if gnorm2 == 0.0:
            converged = True
            break
        step *= 2.0
        accepted = False
        for _ in range(60):
            n_w1 = w1 - step * g_w1
            n_b1 = b1 - step * g_b1
            n_w2 = w2 - step * g_w2
            n_b2 = b2 - step * g_b2
            new_loss = _loss(z, y, n_w1, n_b1, n_w2, n_b2, decay)
            if new_loss <= loss - 1e-4 * step * gnorm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        w1, b1, w2, b2 = n_w1, n_b1, n_w2, n_b2
        rel = abs(loss - new_loss) / max(abs(loss), 1e-12)
        loss = new_loss
        if rel < rel_tol:
            converged = True
            break
    return w1, b1, w2, b2, loss, epochs, converged


def init_weights(q: int, hidden: int, rng: np.random.Generator):
    w1 = rng.uniform(-0.5, 0.5, size=(q, hidden))
    b1 = rng.uniform(-0.5, 0.5, size=hidden)
    w2 = rng.uniform(-0.5, 0.5, size=hidden)
    b2 = float(rng.uniform(-0.5, 0.5))
    return w1, b1, w2, b2


def loss_and_grad(z, y, w1, b1, w2, b2, decay):
    z = np.ascontiguousarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    w1 = np.ascontiguousarray(w1, dtype=float)
    b1 = np.asarray(b1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    loss = _loss(z, y, w1, b1, w2, float(b2), decay)
    return loss, _grad(z, y, w1, b1, w2, float(b2), decay)


def train(z, y, hidden: int, decay: float, rng: np.random.Generator,
          max_epochs: int = 500, rel_tol: float = 1e-8) -> dict:
    if hidden < 1:
        raise ValueError("hidden_size must be >= 1")
    if decay < 0:
        raise ValueError("decay must be >= 0")
    z = np.ascontiguousarray(z, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    w1, b1, w2, b2 = init_weights(z.shape[1], hidden, rng)
    w1, b1, w2, b2, loss, epochs, converged = _train(
        z, y, w1, b1, w2, float(b2), float(decay), int(max_epochs), float(rel_tol))
    return {"w1": w1, "b1": b1, "w2": w2, "b2": float(b2), "loss": float(loss),
            "epochs": int(epochs), "converged": bool(converged)}


def predict(params: dict, z) -> np.ndarray:
    z = np.ascontiguousarray(z, dtype=float)
    _, o = _forward(z, params["w1"], params["b1"], params["w2"], params["b2"])
    return 1.0 / (1.0 + np.exp(-o))

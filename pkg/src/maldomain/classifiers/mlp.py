"""Single-hidden-layer logistic network trained by full-batch gradient descent.

Parameters are kept as one flat vector ``[W1 (h x d), b1 (h), w2 (h), b2]``.
The objective is mean binary cross-entropy plus ``0.5 * l2_decay`` times
the squared norm of the connection weights (biases are not decayed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import ShapeError
from .base import BaseModel, Family, MLPParams


def n_weights(n_inputs: int, hidden: int) -> int:
    return hidden * (n_inputs + 2) + 1


def unpack(theta, n_inputs: int, hidden: int):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (n_weights(n_inputs, hidden),):
        raise ShapeError(
            f"weight vector has shape {theta.shape}, expected ({n_weights(n_inputs, hidden)},)"
        )
    k = hidden * n_inputs
    W1 = theta[:k].reshape(hidden, n_inputs)
    b1 = theta[k : k + hidden]
    w2 = theta[k + hidden : k + 2 * hidden]
    b2 = theta[-1]
    return W1, b1, w2, b2


def _check_batch(X, y, n_inputs):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != n_inputs or y.shape != (len(X),):
        raise ShapeError(f"batch shapes X{X.shape} / y{y.shape} do not fit {n_inputs} inputs")
    return X, y


def forward(theta, X, hidden):
    W1, b1, w2, b2 = unpack(theta, X.shape[1], hidden)
    H = expit(X @ W1.T + b1)
    return H, H @ w2 + b2


def mlp_loss(theta, X, y, hidden: int, l2_decay: float = 0.0) -> float:
    X, y = _check_batch(X, y, np.asarray(X).shape[-1])
    W1, _, w2, _ = unpack(theta, X.shape[1], hidden)
    _, z = forward(theta, X, hidden)
    data = np.mean(np.logaddexp(0.0, z) - y * z)
    return float(data + 0.5 * l2_decay * (np.sum(W1 * W1) + np.dot(w2, w2)))


def mlp_loss_gradient(theta, X, y, hidden: int, l2_decay: float = 0.0) -> np.ndarray:
    """Exact gradient of :func:`mlp_loss` with respect to the flat weight vector."""
    X, y = _check_batch(X, y, np.asarray(X).shape[-1])
    W1, _, w2, _ = unpack(theta, X.shape[1], hidden)
    H, z = forward(theta, X, hidden)
    delta_out = (expit(z) - y) / len(X)
    delta_hidden = np.outer(delta_out, w2) * H * (1.0 - H)
    g_W1 = delta_hidden.T @ X + l2_decay * W1
    g_b1 = delta_hidden.sum(axis=0)
    g_w2 = H.T @ delta_out + l2_decay * w2
    g_b2 = delta_out.sum()
    return np.concatenate([g_W1.ravel(), g_b1, g_w2, [g_b2]])


class _Objective:
    """Loss and gradient on a fixed batch, sharing the forward pass.

    The gradient is always requested at the point whose loss was accepted
    last, so keeping that one forward pass halves the work per iteration.
    """

    def __init__(self, X, y, hidden, l2_decay):
        self.X, self.y, self.hidden, self.l2_decay = X, y, hidden, l2_decay
        self._key = None

    def loss(self, theta):
        W1, b1, w2, b2 = unpack(theta, self.X.shape[1], self.hidden)
        H = expit(self.X @ W1.T + b1)
        z = H @ w2 + b2
        self._key, self._cache = theta, (H, z)
        data = np.mean(np.logaddexp(0.0, z) - self.y * z)
        return float(data + 0.5 * self.l2_decay * (np.sum(W1 * W1) + np.dot(w2, w2)))

    def gradient(self, theta):
        if self._key is not theta:
            self.loss(theta)
        H, z = self._cache
        W1, _, w2, _ = unpack(theta, self.X.shape[1], self.hidden)
        delta_out = (expit(z) - self.y) / len(self.X)
        delta_hidden = np.outer(delta_out, w2) * H * (1.0 - H)
        return np.concatenate([
            (delta_hidden.T @ self.X + self.l2_decay * W1).ravel(),
            delta_hidden.sum(axis=0),
            H.T @ delta_out + self.l2_decay * w2,
            [delta_out.sum()],
        ])


@dataclass(frozen=True, eq=False)
class MLPModel(BaseModel):
    theta: np.ndarray
    n_features: int
    hidden_size: int
    final_loss: float = float("nan")
    iterations: int = 0
    family = Family.MLP

    @classmethod
    def fit(cls, X, y, params: MLPParams, seed: int = 0) -> "MLPModel":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        h, decay = params.hidden_size, params.l2_decay
        rng = np.random.default_rng(seed)
        s = params.weight_init_scale
        theta = rng.uniform(-s, s, size=n_weights(X.shape[1], h))
        obj = _Objective(X, y, h, decay)
        theta, loss, iterations = descend(
            obj.loss,
            obj.gradient,
            theta,
            max_iterations=params.max_iterations,
            initial_step=params.initial_step,
            armijo=params.armijo,
            gradient_tolerance=params.gradient_tolerance,
        )
        return cls(theta, X.shape[1], h, loss, iterations)

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        return forward(self.theta, X, self.hidden_size)[1]


def descend(loss_fn, grad_fn, theta, *, max_iterations, initial_step=1.0, armijo=1e-4,
            gradient_tolerance=1e-6, trace=None):
    """Gradient descent with Armijo backtracking.

    Each iteration starts from twice the previously accepted step. Returns
    ``(theta, loss, iterations)``; ``trace``, if a list, receives the loss
    after every accepted step.
    """
    loss = loss_fn(theta)
    step = initial_step
    it = 0
    for it in range(1, max_iterations + 1):
        g = grad_fn(theta)
        g2 = float(g @ g)
        if np.sqrt(g2) < gradient_tolerance:
            it -= 1
            break
        t = step
        while True:
            candidate = theta - t * g
            new_loss = loss_fn(candidate)
            if new_loss <= loss - armijo * t * g2:
                break
            t *= 0.5
            if t < 1e-14:
                return theta, loss, it - 1
        theta, loss = candidate, new_loss
        if trace is not None:
            trace.append(loss)
        step = 2.0 * t
    return theta, loss, it

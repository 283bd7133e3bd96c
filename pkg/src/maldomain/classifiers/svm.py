"""Soft-margin RBF support vector machine solved by two-variable working-set ascent.

The dual is kept in minimisation form, ``f(a) = 1/2 a'Qa - sum(a)`` with
``Q_ij = y_i y_j K(x_i, x_j)``, subject to ``0 <= a_i <= C`` and
``sum(y_i a_i) = 0``. Each step picks the maximal violating index ``i`` and
the partner ``j`` with the largest second-order decrease, solves the
two-variable subproblem analytically, and clips it to the box. The loop
stops once the KKT gap ``m(a) - M(a)`` is within ``tolerance``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError
from .base import BaseModel, Family, SVMParams

_TAU = 1e-12


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _violation_sets(alpha, y, C):
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    return up, low


def kkt_violation(alpha, y, K, C) -> float:
    """Maximal violating-pair gap ``m(a) - M(a)``; 0 or less means optimal."""
    alpha = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    G = y * (K @ (alpha * y)) - 1.0
    v = -y * G
    up, low = _violation_sets(alpha, y, C)
    if not up.any() or not low.any():
        return 0.0
    return float(v[up].max() - v[low].min())


def dual_objective(alpha, y, K) -> float:
    """Dual objective in maximisation form, ``sum(a) - 1/2 a'Qa``."""
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


@dataclass
class DualSolution:
    alpha: np.ndarray
    bias: float
    iterations: int
    kkt_violation: float
    objective_trace: list = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else 0.0


def svm_solve(K, y, C: float, tolerance: float = 1e-3, max_iterations: int = 1_000_000,
              record_trace: bool = True) -> DualSolution:
    """Solve the soft-margin dual for kernel matrix ``K`` and labels ``y`` in {-1, +1}."""
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.diag(K).copy()
    trace = [0.0] if record_trace else []
    gap = np.inf
    it = 0
    while True:
        v = -y * G
        up, low = _violation_sets(alpha, y, C)
        if not up.any() or not low.any():
            gap = 0.0
            break
        v_up = np.where(up, v, -np.inf)
        i = int(np.argmax(v_up))
        m = v_up[i]
        gap = m - np.min(np.where(low, v, np.inf))
        if gap <= tolerance:
            break
        if it >= max_iterations:
            raise ConvergenceError(
                f"SVM solver did not converge in {max_iterations} pair updates "
                f"(KKT violation {gap:.3g})",
                kkt_violation=float(gap),
            )
        Ki = K[i]
        b = m - v
        quad = diag[i] + diag - 2.0 * Ki
        quad = np.where(quad > 0, quad, _TAU)
        gain = np.where(low & (b > 0), b * b / quad, -np.inf)
        j = int(np.argmax(gain))
        Kj = K[j]

        ai_old, aj_old = alpha[i], alpha[j]
        q = max(diag[i] + diag[j] - 2.0 * Ki[j], _TAU)
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / q
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / q
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        # Q_i = y_i * y * K_i
        G += y * (y[i] * (ai - ai_old) * Ki + y[j] * (aj - aj_old) * Kj)
        it += 1
        if record_trace:
            trace.append(0.5 * alpha.sum() - 0.5 * alpha @ G)

    return DualSolution(alpha, -_rho(alpha, y, G, C), it, float(max(gap, 0.0)), trace)


def _rho(alpha, y, G, C) -> float:
    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        return float(yG[free].mean())
    ub_set = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_set = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_set].min() if ub_set.any() else np.inf
    lb = yG[lb_set].max() if lb_set.any() else -np.inf
    if np.isinf(ub) or np.isinf(lb):
        return float(ub if np.isfinite(ub) else lb if np.isfinite(lb) else 0.0)
    return float(0.5 * (ub + lb))


@dataclass(frozen=True, eq=False)
class SVMModel(BaseModel):
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    gamma: float
    n_features: int
    iterations: int = 0
    kkt_gap: float = 0.0
    family = Family.SVM

    @classmethod
    def fit(cls, X, y, params: SVMParams) -> "SVMModel":
        X = np.asarray(X, dtype=np.float64)
        ys = np.where(np.asarray(y) == 1, 1.0, -1.0)
        K = rbf_kernel(X, X, params.gamma)
        sol = svm_solve(K, ys, params.cost, params.tolerance, params.max_iterations,
                        record_trace=False)
        sv = sol.alpha > 0
        return cls(X[sv], (sol.alpha * ys)[sv], sol.bias, params.gamma, X.shape[1],
                   sol.iterations, sol.kkt_violation)

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        if len(self.support_vectors) == 0:
            return np.full(len(X), self.bias)
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.dual_coef + self.bias

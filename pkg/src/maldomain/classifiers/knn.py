from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import BaseModel, Family, KNNParams

_CHUNK = 128


@dataclass(frozen=True, eq=False)
class KNNModel(BaseModel):
    """Lazy k-nearest-neighbour classifier on Euclidean distance.

    Neighbours at equal distance are ordered by training index; a vote tie
    scores 0 and therefore resolves to malicious.
    """

    X: np.ndarray
    y: np.ndarray
    k: int
    family = Family.KNN

    @property
    def n_features(self):
        return self.X.shape[1]

    @classmethod
    def fit(cls, X, y, params: KNNParams) -> "KNNModel":
        return cls(np.array(X, dtype=np.float64), np.array(y, dtype=np.int8), params.k)

    def _distances(self, q):
        diff = q[:, None, :] - self.X[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)

    def _select(self, dist, k):
        # Everything strictly closer than the k-th distance, then the
        # lowest-index points sitting exactly at it until k are taken.
        kth = np.partition(dist, k - 1, axis=1)[:, k - 1 : k]
        less = dist < kth
        at = dist == kth
        need = k - less.sum(axis=1, keepdims=True)
        return less | (at & (np.cumsum(at, axis=1) <= need))

    def neighbours(self, X) -> np.ndarray:
        """Indices of the k nearest training points, nearest first."""
        X = self._check(X)
        k = min(self.k, len(self.X))
        out = np.empty((len(X), k), dtype=np.int64)
        for start in range(0, len(X), _CHUNK):
            dist = self._distances(X[start : start + _CHUNK])
            idx = np.nonzero(self._select(dist, k))[1].reshape(len(dist), k)
            d_sel = np.take_along_axis(dist, idx, axis=1)
            order = np.argsort(d_sel, axis=1, kind="stable")
            out[start : start + _CHUNK] = np.take_along_axis(idx, order, axis=1)
        return out

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        k = min(self.k, len(self.X))
        votes = np.empty(len(X))
        for start in range(0, len(X), _CHUNK):
            sel = self._select(self._distances(X[start : start + _CHUNK]), k)
            votes[start : start + _CHUNK] = (sel @ self.y.astype(np.float64)) / k
        return 2.0 * votes - 1.0

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .base import BaseModel, Family, NBParams


@dataclass(frozen=True, eq=False)
class GaussianNBModel(BaseModel):
    """Per-feature Gaussian class conditionals with class priors.

    Row 0 of ``means``/``variances`` is the benign class, row 1 malicious.
    """

    priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    family = Family.NAIVE_BAYES

    @property
    def n_features(self):
        return self.means.shape[1]

    @classmethod
    def fit(cls, X, y, params: NBParams) -> "GaussianNBModel":
        X = np.asarray(X, dtype=np.float64)
        priors = np.empty(2)
        means = np.empty((2, X.shape[1]))
        variances = np.empty((2, X.shape[1]))
        for c in (0, 1):
            Xc = X[y == c]
            priors[c] = len(Xc) / len(X)
            means[c] = Xc.mean(axis=0)
            variances[c] = np.maximum(Xc.var(axis=0), params.variance_floor)
        return cls(priors, means, variances)

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = self._check(X)
        out = np.empty((len(X), 2))
        for c in (0, 1):
            var = self.variances[c]
            ll = -0.5 * np.log(2.0 * np.pi * var) - (X - self.means[c]) ** 2 / (2.0 * var)
            out[:, c] = np.log(self.priors[c]) + ll.sum(axis=1)
        return out

    def posteriors(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        return np.exp(jll - logsumexp(jll, axis=1, keepdims=True))

    def decision_function(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        return jll[:, 1] - jll[:, 0]

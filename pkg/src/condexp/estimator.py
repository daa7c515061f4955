"""scikit-learn style wrapper.

Rows are outcomes, ``sample_weight`` gives their probabilities and ``groups``
labels the atom each outcome belongs to. Every column of ``X`` is treated as
a random variable and replaced by its conditional expectation.

>>> import numpy as np
>>> ce = ConditionalExpectation()
>>> ce.fit_transform(np.array([1.0, 2.0, 3.0, 4.0]), groups=[0, 0, 1, 1]).ravel()
array([1.5, 1.5, 3.5, 3.5])
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import _check_sample_weight, check_array, check_is_fitted

from .prob_space import new_space
from .sigma_algebra import SigmaAlgebra
from .solvers import GradientConfig, solve


class ConditionalExpectation(TransformerMixin, BaseEstimator):
    """Project each column of X onto the functions constant on ``groups``.

    Parameters
    ----------
    method : {"oracle", "projection", "gradient"}
        Which solver computes the atom values.
    step_policy : {"jacobi", "fixed"}
        Step rule of the gradient solver.
    tol : float
        Gradient-norm stopping threshold of the gradient solver.
    max_iter : int
        Iteration cap of the gradient solver.
    """

    def __init__(self, method="oracle", step_policy="jacobi", tol=1e-10, max_iter=10_000):
        self.method = method
        self.step_policy = step_policy
        self.tol = tol
        self.max_iter = max_iter

    def _columns(self, X):
        X = check_array(X, ensure_2d=False, dtype=float)
        return X.reshape(-1, 1) if X.ndim == 1 else X

    def fit(self, X, y=None, groups=None, sample_weight=None):
        if groups is None:
            raise ValueError("groups (atom label per row) is required")
        X = self._columns(X)
        groups = np.asarray(groups)
        if groups.shape != (X.shape[0],):
            raise ValueError(f"groups has shape {groups.shape}, expected ({X.shape[0]},)")
        weights = _check_sample_weight(sample_weight, X)
        self.space_ = new_space(weights)
        self.sigma_ = SigmaAlgebra.from_labels(groups.tolist())
        self.n_features_in_ = X.shape[1]
        self.atom_values_ = self._solve(X)
        return self

    def _solve(self, X):
        config = GradientConfig(step_policy=self.step_policy, tolerance=self.tol, max_iterations=self.max_iter)
        cols = [solve(self.space_, self.sigma_, X[:, j], self.method, config).atom_values for j in range(X.shape[1])]
        return np.column_stack(cols)

    def transform(self, X):
        """Conditional expectation of each column, one value per row."""
        check_is_fitted(self, "atom_values_")
        X = self._columns(X)
        if X.shape[0] != self.space_.size:
            raise ValueError(f"X has {X.shape[0]} rows; fitted space has {self.space_.size} outcomes")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return self._solve(X)[self.sigma_.atom_index()]

"""Estimator-style wrappers around the spectral routines.

These follow the scikit-learn conventions (constructor stores parameters,
``fit`` learns trailing-underscore attributes and returns ``self``) so they
compose with ``get_params``/``set_params``, ``clone`` and pipelines.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix
from .nonbacktracking import build_nb_operator, spectral_radius
from .spectra import dilation, mp_edges, singular_values

__all__ = ["NonBacktrackingRadius", "ExtremeSingularValues", "DilationTransformer"]


class NonBacktrackingRadius(BaseEstimator):
    """Spectral radius of the non-backtracking operator of ``X``.

    Parameters
    ----------
    dense_threshold : int
        Edge count up to which the full spectrum is computed.
    tol : float
        Convergence tolerance of the norm-growth estimate.
    max_power_steps : int
        Step cap for the norm-growth estimate.
    random_state : int
        Seed of the start vector.

    Attributes
    ----------
    rho_ : float
    method_ : str
    converged_ : bool
    n_edges_ : int
    gamma_quarter_ : float
        ``gamma^(1/4)`` with ``gamma`` the measured ratio of the smaller to
        the larger maximal row/column sum of squares.
    """

    def __init__(self, dense_threshold=2000, tol=1e-3, max_power_steps=4096, random_state=0):
        self.dense_threshold = dense_threshold
        self.tol = tol
        self.max_power_steps = max_power_steps
        self.random_state = random_state

    def fit(self, X, y=None):
        a = as_matrix(X)
        B = build_nb_operator(a)
        est = spectral_radius(B, dense_threshold=self.dense_threshold, tol=self.tol,
                              max_power_steps=self.max_power_steps, seed=self.random_state)
        self.rho_ = est.rho
        self.method_ = est.method.value
        self.converged_ = bool(est.converged)
        self.n_edges_ = B.E
        sq = a * a
        row, col = sq.sum(axis=1).max(initial=0.0), sq.sum(axis=0).max(initial=0.0)
        big = max(row, col)
        self.gamma_quarter_ = (min(row, col) / big) ** 0.25 if big > 0 else math.nan
        return self

    def score(self, X=None, y=None):
        """Negative distance ``-|rho(B) - gamma^(1/4)|``."""
        check_is_fitted(self, "rho_")
        return -abs(self.rho_ - self.gamma_quarter_)


class ExtremeSingularValues(BaseEstimator):
    """Largest and smallest singular values, with the Bai-Yin edges for reference.

    Parameters
    ----------
    method : {"auto", "dense_full", "iterative"}
    gamma : float or None
        Aspect parameter used for ``edges_``; defaults to ``min(n, m)/max(n, m)``.

    Attributes
    ----------
    sigma_max_, sigma_min_ : float
    edges_ : tuple of float
    """

    def __init__(self, method="auto", gamma=None):
        self.method = method
        self.gamma = gamma

    def fit(self, X, y=None):
        a = as_matrix(X)
        s = singular_values(a, method=self.method)
        self.sigma_max_ = s.sigma_max
        self.sigma_min_ = s.sigma_min
        g = self.gamma if self.gamma is not None else min(a.shape) / max(a.shape)
        self.edges_ = mp_edges(g)
        return self

    def score(self, X=None, y=None):
        """Negative largest deviation from the edges."""
        check_is_fitted(self, "sigma_max_")
        lo, hi = self.edges_
        return -max(abs(self.sigma_max_ - hi), abs(self.sigma_min_ - lo))


class DilationTransformer(TransformerMixin, BaseEstimator):
    """Map ``X`` to its symmetric dilation ``[[0, X], [X^T, 0]]``."""

    def fit(self, X, y=None):
        a = as_matrix(X)
        self.n_features_in_ = a.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        a = as_matrix(X)
        if a.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {a.shape[1]} columns, expected {self.n_features_in_}")
        return dilation(a)

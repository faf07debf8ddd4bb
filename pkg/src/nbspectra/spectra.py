"""Reference singular values, dilation spectra and Marchenko-Pastur edges."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from ._validation import as_matrix, check_gamma

__all__ = [
    "SpectralMethod",
    "SpectralSummary",
    "DENSE_THRESHOLD",
    "singular_values",
    "dilation",
    "dilation_eigenvalues",
    "mp_edges",
]

DENSE_THRESHOLD = 3000


class SpectralMethod(str, enum.Enum):
    DENSE_FULL = "dense_full"
    ITERATIVE = "iterative"


@dataclass(frozen=True)
class SpectralSummary:
    """Extreme singular values of one matrix.

    ``sigma_min`` is the smallest of the ``min(n, m)`` singular values; it is
    ``nan`` for the iterative method, which only resolves ``sigma_max``.
    """

    sigma_max: float
    sigma_min: float
    all_singular_values: tuple[float, ...] | None
    method: SpectralMethod
    residual: float
    iterations: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        if self.all_singular_values is not None:
            d["all_singular_values"] = list(self.all_singular_values)
        return d


def singular_values(X, method: str = "auto", dense_threshold: int = DENSE_THRESHOLD,
                    tol: float = 1e-10, max_iter: int = 10_000, seed: int = 0) -> SpectralSummary:
    """Singular values of ``X``.

    The dense path runs a full LAPACK SVD and reports the max-abs
    reconstruction error ``|X - U S V^T|`` as the residual. Above
    ``dense_threshold`` (on ``min(n, m)``) only the iterative path is
    allowed, which runs power iteration on the Gram operator and returns
    ``sigma_max`` alone.
    """
    a = as_matrix(X)
    k = min(a.shape)
    if method == "auto":
        method = SpectralMethod.DENSE_FULL if k <= dense_threshold else None
        if method is None:
            raise OverflowError(
                f"min(n, m) = {k} exceeds the dense threshold {dense_threshold}; "
                "request method='iterative' for sigma_max only")
    method = SpectralMethod(method)
    if method is SpectralMethod.DENSE_FULL:
        if k > dense_threshold:
            raise OverflowError(f"min(n, m) = {k} exceeds the dense threshold {dense_threshold}")
        u, s, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesdd")
        resid = float(np.abs(a - (u * s) @ vt).max()) if a.size else 0.0
        return SpectralSummary(float(s[0]), float(s[-1]), tuple(float(v) for v in s),
                               method, resid, 1)
    return _power_sigma_max(a, tol, max_iter, seed)


def _power_sigma_max(a: np.ndarray, tol: float, max_iter: int, seed: int) -> SpectralSummary:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        w = a.T @ (a @ v)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return SpectralSummary(0.0, math.nan, None, SpectralMethod.ITERATIVE, 0.0, it)
        v = w / new
        if abs(new - lam) <= tol * new:
            lam = new
            break
        lam = new
    sigma = math.sqrt(lam)
    # backward error of the Rayleigh pair (sigma^2, v) for the Gram matrix
    resid = float(np.linalg.norm(a.T @ (a @ v) - lam * v))
    return SpectralSummary(sigma, math.nan, None, SpectralMethod.ITERATIVE, resid, it)


def dilation(X) -> np.ndarray:
    """Symmetric ``(n+m) x (n+m)`` matrix ``[[0, X], [X^T, 0]]``."""
    a = as_matrix(X)
    n, m = a.shape
    h = np.zeros((n + m, n + m))
    h[:n, n:] = a
    h[n:, :n] = a.T
    return h


def dilation_eigenvalues(X, dense_threshold: int = DENSE_THRESHOLD) -> np.ndarray:
    """Ascending eigenvalues of the dilation of ``X``."""
    a = as_matrix(X)
    if min(a.shape) > dense_threshold:
        raise OverflowError("matrix exceeds the dense threshold")
    return scipy.linalg.eigvalsh(dilation(a))


def mp_edges(gamma: float) -> tuple[float, float]:
    """Bai-Yin edges ``(1 - sqrt(gamma), 1 + sqrt(gamma))``."""
    r = math.sqrt(check_gamma(gamma))
    return 1.0 - r, 1.0 + r

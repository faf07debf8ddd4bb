"""Input validation shared by the numerical modules."""

import numpy as np
from sklearn.utils import check_array


def as_matrix(X, allow_empty: bool = False) -> np.ndarray:
    """Return ``X`` as a finite 2-D float array.

    Accepts raw arrays, nested lists, scipy sparse matrices and
    :class:`~nbspectra.model.SampledMatrix`.
    """
    entries = getattr(X, "entries", X)
    if hasattr(entries, "toarray"):
        entries = entries.toarray()
    arr = np.asarray(entries)
    if np.iscomplexobj(arr):
        raise ValueError("only real matrices are supported")
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got {arr.ndim} dimension(s)")
    if allow_empty and arr.size == 0:
        return arr.astype(float)
    return check_array(arr, dtype=np.float64, ensure_min_samples=1, ensure_min_features=1)


def check_gamma(gamma: float, strict_upper: bool = False) -> float:
    gamma = float(gamma)
    ok = 0.0 < gamma < 1.0 if strict_upper else 0.0 < gamma <= 1.0
    if not ok:
        interval = "(0, 1)" if strict_upper else "(0, 1]"
        raise ValueError(f"gamma must lie in {interval}, got {gamma}")
    return gamma

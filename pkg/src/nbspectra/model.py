"""Variance profiles and samplers for inhomogeneous random rectangular matrices.

Two models are supported:

* ``BIPARTITE_BERNOULLI``: an inhomogeneous Erdos-Renyi bipartite graph with
  edge probabilities ``p_ij``. Samples are the centered, degree-normalized
  biadjacency matrix ``X = (A - EA) / sqrt(d)``.
* ``BOUNDED_GENERAL``: independent, mean-zero entries with prescribed second
  moments ``s_ij`` and sup-norm bound ``|X_ij| <= 1/q``.

Randomness is counter based: the uniform driving entry ``(i, j)`` is the
``i*m + j``-th double of a Philox stream keyed by the seed, so a sample is a
pure function of ``(profile, seed)``.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

__all__ = [
    "ModelKind",
    "VarianceProfile",
    "ProfileStats",
    "SampledMatrix",
    "make_bipartite_profile",
    "make_bounded_profile",
    "profile_stats",
    "sample_centered_adjacency",
    "sample_bounded_model",
    "three_point",
    "oriented",
    "profile_to_dict",
    "profile_from_dict",
    "load_profile",
    "save_profile",
    "write_matrix_csv",
    "read_matrix_csv",
]


class ModelKind(str, enum.Enum):
    BIPARTITE_BERNOULLI = "bipartite_bernoulli"
    BOUNDED_GENERAL = "bounded_general"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class VarianceProfile:
    """Matrix of Bernoulli parameters or second moments.

    Parameters
    ----------
    s : ndarray of shape (n, m)
        ``p_ij`` for the graph model, ``E|X_ij|^2`` for the general model.
    model_kind : ModelKind
    spec : object, optional
        The compact description the profile was built from (scalar, nested
        list or block dict). Kept for JSON round trips.
    """

    s: np.ndarray
    model_kind: ModelKind = ModelKind.BIPARTITE_BERNOULLI
    spec: Any = field(default=None, compare=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise ValueError(f"profile must be a non-empty 2-D array, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("profile entries must be finite")
        if np.any(s < 0):
            raise ValueError("profile entries must be nonnegative")
        kind = ModelKind(self.model_kind)
        if kind is ModelKind.BIPARTITE_BERNOULLI and np.any(s > 1):
            raise ValueError("Bernoulli parameters must lie in [0, 1]")
        object.__setattr__(self, "s", _readonly(s))
        object.__setattr__(self, "model_kind", kind)

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @property
    def m(self) -> int:
        return self.s.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.s.shape

    @property
    def profile_id(self) -> str:
        """Short content hash identifying the profile."""
        h = hashlib.sha256()
        h.update(self.model_kind.value.encode())
        h.update(np.asarray(self.s.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.s).tobytes())
        return h.hexdigest()[:16]

    def transpose(self) -> "VarianceProfile":
        return VarianceProfile(self.s.T, self.model_kind)


@dataclass(frozen=True)
class ProfileStats:
    d: float
    rho_max: float
    rho_tilde_max: float
    rho_tilde_min: float
    gamma: float
    kappa: float
    q: float
    N: int
    y: float


@dataclass(frozen=True, eq=False)
class SampledMatrix:
    """One realization ``X`` with its guaranteed bound ``max |X_ij| <= 1/q_bound``."""

    entries: np.ndarray
    q_bound: float
    seed: int
    profile_id: str
    transposed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "entries", _readonly(self.entries))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        a = self.entries
        return a.astype(dtype) if dtype is not None else a


# ---------------------------------------------------------------------------
# construction


def _expand(n: int, m: int, spec: Any) -> np.ndarray:
    if n < 1 or m < 1:
        raise ValueError(f"dimensions must be positive, got n={n}, m={m}")
    if isinstance(spec, dict):
        return _expand_blocks(n, m, spec)
    a = np.asarray(spec, dtype=float)
    if a.ndim == 0:
        return np.full((n, m), float(a))
    if a.shape != (n, m):
        raise ValueError(f"matrix spec has shape {a.shape}, expected {(n, m)}")
    return a.copy()


def _expand_blocks(n: int, m: int, spec: dict) -> np.ndarray:
    # {"row_sizes": [...], "col_sizes": [...], "values": [[...], ...]}
    rows = [int(r) for r in spec["row_sizes"]]
    cols = [int(c) for c in spec["col_sizes"]]
    vals = np.asarray(spec["values"], dtype=float)
    if sum(rows) != n or sum(cols) != m:
        raise ValueError("block sizes do not add up to the matrix dimensions")
    if vals.shape != (len(rows), len(cols)):
        raise ValueError("block value table does not match the block layout")
    return np.repeat(np.repeat(vals, rows, axis=0), cols, axis=1)


def make_bipartite_profile(n: int, m: int, p: Any) -> VarianceProfile:
    """Edge-probability profile of an inhomogeneous bipartite random graph.

    ``p`` may be a scalar, an ``(n, m)`` array, or a block description
    ``{"row_sizes": [...], "col_sizes": [...], "values": [[...]]}``.
    """
    s = _expand(n, m, p)
    if np.any((s < 0) | (s > 1)) or not np.all(np.isfinite(s)):
        raise ValueError("probabilities must lie in [0, 1]")
    return VarianceProfile(s, ModelKind.BIPARTITE_BERNOULLI, spec=_jsonable(p))


def make_bounded_profile(n: int, m: int, s: Any) -> VarianceProfile:
    """Second-moment profile for the bounded general model."""
    return VarianceProfile(_expand(n, m, s), ModelKind.BOUNDED_GENERAL, spec=_jsonable(s))


def _jsonable(spec: Any) -> Any:
    if isinstance(spec, dict):
        return {k: _jsonable(v) for k, v in spec.items()}
    if isinstance(spec, np.ndarray):
        return spec.tolist()
    if isinstance(spec, (np.floating, np.integer)):
        return spec.item()
    return spec


def oriented(profile: VarianceProfile) -> tuple[VarianceProfile, bool]:
    """Return the profile with ``n >= m`` and whether it was transposed."""
    if profile.n >= profile.m:
        return profile, False
    return profile.transpose(), True


# ---------------------------------------------------------------------------
# derived scalars


def profile_stats(profile: VarianceProfile) -> ProfileStats:
    """Maximal expected degree and the normalized row/column maxima.

    ``rho_max`` is the normalized maximal *column* sum and ``rho_tilde_max``
    the normalized maximal *row* sum. ``rho_tilde_min`` is the normalized
    minimal column variance sum (``sum_i p_ij (1 - p_ij)`` for the graph
    model).
    """
    s = profile.s
    col = s.sum(axis=0)
    row = s.sum(axis=1)
    d = float(max(col.max(), row.max()))
    if d <= 0:
        raise ValueError("profile is identically zero (d = 0)")
    rho_max = float(col.max() / d)
    rho_tilde_max = float(row.max() / d)
    if profile.model_kind is ModelKind.BIPARTITE_BERNOULLI:
        rho_tilde_min = float((s * (1.0 - s)).sum(axis=0).min() / d)
        q = math.sqrt(d)
    else:
        rho_tilde_min = float(col.min() / d)
        # largest q for which the three-point law is feasible
        q = 1.0 / math.sqrt(float(s.max()))
    N = max(profile.n, profile.m)
    return ProfileStats(
        d=d,
        rho_max=rho_max,
        rho_tilde_max=rho_tilde_max,
        rho_tilde_min=rho_tilde_min,
        gamma=min(rho_max, rho_tilde_max),
        kappa=float(N * s.max() / d),
        q=q,
        N=N,
        y=profile.m / profile.n,
    )


# ---------------------------------------------------------------------------
# sampling


def _uniforms(seed: int, n: int, m: int) -> np.ndarray:
    bitgen = np.random.Philox(key=int(seed) % (1 << 64))
    return np.random.Generator(bitgen).random((n, m))


def sample_centered_adjacency(profile: VarianceProfile, seed: int) -> SampledMatrix:
    """Sample ``X = (A - EA) / sqrt(d)`` for a Bernoulli profile."""
    if profile.model_kind is not ModelKind.BIPARTITE_BERNOULLI:
        raise ValueError("centered adjacency sampling needs a Bernoulli profile")
    d = profile_stats(profile).d
    p = profile.s
    a = (_uniforms(seed, *p.shape) < p).astype(float)
    x = (a - p) / math.sqrt(d)
    q = math.sqrt(d)
    assert np.abs(x).max() <= 1.0 / q
    return SampledMatrix(x, q, int(seed), profile.profile_id)


def three_point(u: np.ndarray, s: np.ndarray, q: float) -> np.ndarray:
    """Symmetric law on ``{-1/q, 0, 1/q}`` with variance ``s``."""
    w = q * q * s
    out = np.zeros_like(u)
    out[u < 0.5 * w] = -1.0 / q
    out[(u >= 0.5 * w) & (u < w)] = 1.0 / q
    return out


def sample_bounded_model(
    profile: VarianceProfile,
    q: float,
    seed: int,
    distribution: Callable[[np.ndarray, np.ndarray, float], np.ndarray] = three_point,
) -> SampledMatrix:
    """Sample mean-zero entries with ``E X_ij^2 = s_ij`` and ``|X_ij| <= 1/q``.

    ``distribution(u, s, q)`` maps per-entry uniforms to entries; the default
    is :func:`three_point`.
    """
    if profile.model_kind is not ModelKind.BOUNDED_GENERAL:
        raise ValueError("bounded sampling needs a BOUNDED_GENERAL profile")
    if not q > 0:
        raise ValueError("q must be positive")
    s = profile.s
    if np.any(s * q * q > 1.0 + 1e-12):
        raise ValueError("infeasible profile: s_ij exceeds 1/q^2")
    x = distribution(_uniforms(seed, *s.shape), s, q)
    if np.abs(x).max(initial=0.0) > 1.0 / q:
        raise ValueError("distribution violated the sup-norm bound 1/q")
    return SampledMatrix(x, float(q), int(seed), profile.profile_id)


# ---------------------------------------------------------------------------
# serialization


def profile_to_dict(profile: VarianceProfile, seed: int | None = None) -> dict:
    spec = profile.spec if profile.spec is not None else profile.s.tolist()
    doc = {"n": profile.n, "m": profile.m, "model_kind": profile.model_kind.value, "p": spec}
    if seed is not None:
        doc["seed"] = int(seed)
    return doc


def profile_from_dict(doc: dict) -> VarianceProfile:
    kind = ModelKind(doc.get("model_kind", ModelKind.BIPARTITE_BERNOULLI))
    n, m = int(doc["n"]), int(doc["m"])
    spec = doc.get("p", doc.get("s"))
    if spec is None:
        raise ValueError("profile document needs a 'p' entry")
    if kind is ModelKind.BIPARTITE_BERNOULLI:
        return make_bipartite_profile(n, m, spec)
    return make_bounded_profile(n, m, spec)


def save_profile(profile: VarianceProfile, path, seed: int | None = None) -> None:
    Path(path).write_text(json.dumps(profile_to_dict(profile, seed), indent=2, sort_keys=True))


def load_profile(path) -> tuple[VarianceProfile, int | None]:
    doc = json.loads(Path(path).read_text())
    return profile_from_dict(doc), doc.get("seed")


def write_matrix_csv(x, path, sparse: bool = True) -> None:
    """Row-major ``i,j,value`` triplets; zeros are omitted when ``sparse``."""
    a = np.asarray(x, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "value"])
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                v = a[i, j]
                if sparse and v == 0.0:
                    continue
                w.writerow([i, j, repr(float(v))])


def read_matrix_csv(path, shape: tuple[int, int]) -> np.ndarray:
    a = np.zeros(shape)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            a[int(row["i"]), int(row["j"])] = float(row["value"])
    return a

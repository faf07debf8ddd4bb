"""lambda-deformed matrices and determinant criteria linking ``sigma(B)`` to ``X``.

For real ``X`` and ``lambda`` away from ``+-|X_ij|``::

    X_ij(lambda) = lambda X_ij / (lambda^2 - X_ij^2)
    m1_i(lambda) = 1 + sum_k X_ik^2 / (lambda^2 - X_ik^2)
    m2_j(lambda) = 1 + sum_k X_kj^2 / (lambda^2 - X_kj^2)

and ``lambda`` is an eigenvalue of ``B`` exactly when ``M(lambda) - H(lambda)``
is singular, where ``M = diag(m1, m2)`` and ``H(lambda)`` is the dilation of
``X(lambda)``. The lower-left block of ``H(lambda)`` is the plain transpose
``X(lambda)^T`` (``lambda`` is not conjugated).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._validation import as_matrix
from .nonbacktracking import build_nb_operator, nb_eigenvalues

__all__ = [
    "SingularLambdaError",
    "DeformedSystem",
    "IharaBassEvaluation",
    "IharaCheckReport",
    "ScanRow",
    "ScanTable",
    "BLOCK_THRESHOLD",
    "deform",
    "ib_discriminant",
    "verify_ib_on_spectrum",
    "imaginary_axis_scan",
    "scan_to_csv",
]

BLOCK_THRESHOLD = 1e-12


class SingularLambdaError(ValueError):
    """``lambda^2`` is (numerically) equal to some ``X_ij^2`` on the support."""


@dataclass(frozen=True, eq=False)
class DeformedSystem:
    lam: complex
    X_lambda: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    singular_guard: float
    real_imaginary_path: bool = False

    @property
    def n(self) -> int:
        return self.X_lambda.shape[0]

    @property
    def M1(self) -> np.ndarray:
        return np.diag(self.m1)

    @property
    def M2(self) -> np.ndarray:
        return np.diag(self.m2)

    @property
    def M_lambda(self) -> np.ndarray:
        return np.diag(np.concatenate([self.m1, self.m2]))

    @property
    def H_lambda(self) -> np.ndarray:
        n, m = self.X_lambda.shape
        h = np.zeros((n + m, n + m), dtype=complex)
        h[:n, n:] = self.X_lambda
        h[n:, :n] = self.X_lambda.T
        return h


def _default_guard(a: np.ndarray) -> float:
    return 1e-6 * float(np.max(a * a, initial=0.0))


def deform(X, lam: complex, guard_tol: float | None = None) -> DeformedSystem:
    """Build ``X(lambda)``, ``M1(lambda)`` and ``M2(lambda)``.

    Raises :class:`SingularLambdaError` when ``|lambda|^2`` or
    ``min |lambda^2 - X_ij^2|`` over the support falls below ``guard_tol``
    (default ``1e-6 max X_ij^2``).
    For ``lambda = i*beta`` with ``beta > 0`` the diagonal factors are
    evaluated in real arithmetic.
    """
    a = as_matrix(X)
    lam = complex(lam)
    tol = _default_guard(a) if guard_tol is None else float(guard_tol)
    x2 = a * a
    support = a != 0
    # H always has zero entries (its diagonal blocks), so lambda^2 = 0 is excluded too
    diff = np.abs(lam * lam - x2[support])
    guard = min(float(diff.min(initial=math.inf)), abs(lam) ** 2)
    if guard <= tol or guard == 0.0:
        raise SingularLambdaError(f"lambda={lam} sits within {guard:.3g} of an excluded point")

    if lam.real == 0.0 and lam.imag > 0.0:
        beta2 = lam.imag ** 2
        frac = np.where(support, x2 / (beta2 + x2), 0.0)
        m1 = 1.0 - frac.sum(axis=1)
        m2 = 1.0 - frac.sum(axis=0)
        y = np.where(support, a / (beta2 + x2), 0.0)
        x_lam = -1j * lam.imag * y
        return DeformedSystem(lam, x_lam, m1.astype(complex), m2.astype(complex), guard, True)

    denom = np.where(support, lam * lam - x2, 1.0)
    x_lam = np.where(support, lam * a / denom, 0.0)
    frac = np.where(support, x2 / denom, 0.0)
    m1 = 1.0 + frac.sum(axis=1)
    m2 = 1.0 + frac.sum(axis=0)
    return DeformedSystem(lam, x_lam, m1, m2, guard, False)


@dataclass(frozen=True)
class IharaBassEvaluation:
    lam: complex
    log_abs_det: float
    smallest_singular_of_system: float
    block_log_abs_det: float | None
    consistency_gap: float | None
    norm_M: float
    norm_H: float

    @property
    def block_available(self) -> bool:
        return self.block_log_abs_det is not None

    @property
    def scale(self) -> float:
        return 1.0 + self.norm_M + self.norm_H


def ib_discriminant(X, lam: complex, guard_tol: float | None = None) -> IharaBassEvaluation:
    """Root indicator ``sigma_min(M(lambda) - H(lambda))`` and log-determinants.

    The block form ``det(M2 - X(l)^T M1^-1 X(l)) det(M1)`` is skipped (left as
    ``None``) when ``min |m1_i| < 1e-12``; the full form is always returned.
    """
    sys_ = deform(X, lam, guard_tol)
    h = sys_.H_lambda
    k = sys_.M_lambda.astype(complex) - h
    _, logdet = np.linalg.slogdet(k)
    smin = float(scipy.linalg.svdvals(k)[-1])
    norm_m = float(np.abs(np.concatenate([sys_.m1, sys_.m2])).max())
    norm_h = float(scipy.linalg.svdvals(h)[0]) if h.size else 0.0

    block = gap = None
    if np.abs(sys_.m1).min() >= BLOCK_THRESHOLD:
        xl = sys_.X_lambda
        schur = np.diag(sys_.m2) - xl.T @ (xl / sys_.m1[:, None])
        _, ls = np.linalg.slogdet(schur)
        block = float(ls + np.log(np.abs(sys_.m1)).sum())
        gap = abs(float(logdet) - block)
        if math.isnan(gap):  # both -inf
            gap = 0.0 if block == float(logdet) else math.inf
    return IharaBassEvaluation(lam, float(logdet), smin, block, gap, norm_m, norm_h)


@dataclass
class IharaCheckReport:
    n_eigenvalues: int = 0
    n_checked: int = 0
    skipped: list = field(default_factory=list)
    root_violations: list = field(default_factory=list)
    worst_root_ratio: float = 0.0
    n_probes: int = 0
    probe_skipped: list = field(default_factory=list)
    probe_violations: list = field(default_factory=list)
    min_probe_indicator: float = math.inf
    block_checked: int = 0
    block_violations: list = field(default_factory=list)
    max_block_gap: float = 0.0

    @property
    def n_violations(self) -> int:
        return len(self.root_violations) + len(self.probe_violations) + len(self.block_violations)

    @property
    def ok(self) -> bool:
        return self.n_violations == 0


def _block_ok(ev: IharaBassEvaluation, rtol: float) -> bool:
    return ev.consistency_gap <= rtol + rtol * abs(ev.log_abs_det)


def verify_ib_on_spectrum(X, tol: float = 1e-8, guard_tol: float | None = None,
                          probe_floor: float = 1e-4, probe_offsets=(0.5, 1.0),
                          block_rtol: float = 1e-8, dense_threshold: int = 2000) -> IharaCheckReport:
    """Check the determinant criterion against the dense spectrum of ``B``.

    Every eigenvalue passing the guard must have indicator at most
    ``tol * (1 + |M| + |H(lambda)|)``; real probes at ``rho(B) + offset``
    must have indicator at least ``probe_floor``. Full and block
    log-determinants are compared at the probes, where the determinant is
    bounded away from zero (at roots both are dominated by rounding).
    """
    a = as_matrix(X)
    B = build_nb_operator(a)
    eig = nb_eigenvalues(B, dense_threshold)
    rep = IharaCheckReport(n_eigenvalues=len(eig))
    if len(eig) == 0:
        # B is empty; treat 0 as its only spectral point
        eig = np.zeros(1, dtype=complex)
    for lam in eig:
        try:
            ev = ib_discriminant(a, lam, guard_tol)
        except SingularLambdaError:
            rep.skipped.append(complex(lam))
            continue
        rep.n_checked += 1
        ratio = ev.smallest_singular_of_system / (tol * ev.scale)
        rep.worst_root_ratio = max(rep.worst_root_ratio, ratio)
        if ratio > 1.0:
            rep.root_violations.append((complex(lam), ev.smallest_singular_of_system))

    rho = float(np.abs(eig).max())
    for off in probe_offsets:
        lam = rho + off
        try:
            ev = ib_discriminant(a, lam, guard_tol)
        except SingularLambdaError:
            rep.probe_skipped.append(lam)
            continue
        rep.n_probes += 1
        rep.min_probe_indicator = min(rep.min_probe_indicator, ev.smallest_singular_of_system)
        if ev.smallest_singular_of_system < probe_floor:
            rep.probe_violations.append((lam, ev.smallest_singular_of_system))
        if ev.block_available:
            rep.block_checked += 1
            rep.max_block_gap = max(rep.max_block_gap, ev.consistency_gap)
            if not _block_ok(ev, block_rtol):
                rep.block_violations.append((lam, ev.consistency_gap))
    return rep


# ---------------------------------------------------------------------------
# imaginary axis


@dataclass(frozen=True, eq=False)
class ScanRow:
    beta: float
    m1: np.ndarray
    min_m1: float
    matrix: np.ndarray | None
    smallest_eig: float
    psd: bool
    valid: bool


@dataclass(frozen=True, eq=False)
class ScanTable:
    rows: tuple[ScanRow, ...]
    transposed: bool = False

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def imaginary_axis_scan(X, betas, psd_tol: float = 1e-12) -> ScanTable:
    """Evaluate ``M2(i b) - X(i b)^T M1(i b)^-1 X(i b)`` along the imaginary axis.

    With ``Y_ij = X_ij / (b^2 + X_ij^2)`` the matrix equals
    ``M2 + b^2 Y^T M1^-1 Y`` and is real symmetric. A row is invalid when
    some ``m1_i(i b) <= 0``. Inputs with ``n < m`` are transposed first.
    """
    a = as_matrix(X)
    transposed = a.shape[0] < a.shape[1]
    if transposed:
        a = a.T
    x2 = a * a
    rows = []
    for beta in betas:
        beta = float(beta)
        if not beta > 0:
            raise ValueError("beta must be positive")
        b2 = beta * beta
        frac = x2 / (b2 + x2)
        m1 = 1.0 - frac.sum(axis=1)
        m2 = 1.0 - frac.sum(axis=0)
        min_m1 = float(m1.min())
        if min_m1 <= 0.0:
            rows.append(ScanRow(beta, m1, min_m1, None, math.nan, False, False))
            continue
        y = a / (b2 + x2)
        s = np.diag(m2) + b2 * (y.T @ (y / m1[:, None]))
        s = 0.5 * (s + s.T)
        lo = float(scipy.linalg.eigvalsh(s)[0])
        rows.append(ScanRow(beta, m1, min_m1, s, lo, lo >= -psd_tol * max(1.0, np.abs(s).max()), True))
    return ScanTable(tuple(rows), transposed)


def scan_to_csv(table: ScanTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta", "min_m1", "smallest_eig", "psd_flag"])
        for r in table:
            w.writerow([repr(r.beta), repr(r.min_m1), repr(r.smallest_eig), int(r.psd)])

"""Closed-form singular-value bounds driven by the non-backtracking radius.

The deterministic bounds hold for every matrix meeting their hypotheses and
are checked instance by instance. Probability-level right-hand sides carry
absolute constants that are not pinned down; they are evaluated with an
explicit ``constants`` map (all 1.0 by default) and only ever displayed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from ._validation import as_matrix, check_gamma
from .model import ProfileStats

__all__ = [
    "DEFAULT_CONSTANTS",
    "Direction",
    "BoundReport",
    "lemma_upper_bound",
    "f_g",
    "rescaled_upper_bound",
    "lemma_lower_bound",
    "lower_bound_scale",
    "theorem_upper_rhs",
    "theorem_lower_rhs",
    "q_regime",
    "bennett_h",
    "bennett_tail",
    "dilation_norms",
    "check_hypotheses",
    "minimal_delta",
    "evaluate_instance",
    "write_reports_csv",
]

DEFAULT_CONSTANTS: dict[str, float] = {
    "C": 1.0, "C1": 1.0, "C2": 1.0, "C4": 1.0, "C_prime": 1.0,
    "c0": 1.0, "c1": 1.0, "c2": 1.0, "c3": 1.0,
}


def _constants(overrides: Mapping[str, float] | None) -> dict[str, float]:
    c = dict(DEFAULT_CONSTANTS)
    if overrides:
        unknown = set(overrides) - set(c)
        if unknown:
            raise KeyError(f"unknown constants: {sorted(unknown)}")
        c.update({k: float(v) for k, v in overrides.items()})
    return c


class Direction(str, enum.Enum):
    UPPER_ON_SIGMA_MAX_SQ = "upper_on_sigma_max_sq"
    LOWER_ON_SIGMA_MIN_SQ = "lower_on_sigma_min_sq"
    TAIL_PROBABILITY = "tail_probability"


@dataclass(frozen=True)
class BoundReport:
    """A bound compared against an observed value.

    ``margin`` is positive when the bound holds: ``bound - observed`` for
    upper bounds, ``observed - bound`` for lower bounds.
    """

    direction: Direction
    bound_value: float
    observed_value: float
    hypotheses_ok: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    vacuous: bool = False
    instance_id: str = ""
    params: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        if self.direction is Direction.LOWER_ON_SIGMA_MIN_SQ:
            return self.observed_value - self.bound_value
        return self.bound_value - self.observed_value

    @property
    def holds(self) -> bool:
        return self.margin >= 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["direction"] = self.direction.value
        d["margin"] = self.margin
        return d

    def csv_row(self) -> list:
        return [self.instance_id, self.direction.value, repr(self.bound_value),
                repr(self.observed_value), repr(self.margin), int(all(self.hypotheses_ok.values()))]


CSV_HEADER = ["instance_id", "direction", "bound", "observed", "margin", "hypotheses_ok"]


# ---------------------------------------------------------------------------
# deterministic bounds


def lemma_upper_bound(lam: float, gamma: float, delta: float) -> float:
    """Upper bound on ``sigma_max(X)^2`` for ``lam >= max(gamma^(1/4)(1+sqrt(delta)), rho(B))``.

    ``(lam + 1/lam)(lam + gamma/lam) + 6 delta/gamma (2 lam + (1+gamma)/lam)
    + 36 delta^2/gamma^2``.
    """
    gamma = check_gamma(gamma)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not 0 <= delta <= math.sqrt(gamma):
        raise ValueError("delta must lie in [0, sqrt(gamma)]")
    return ((lam + 1.0 / lam) * (lam + gamma / lam)
            + 6.0 / gamma * delta * (2.0 * lam + (1.0 + gamma) / lam)
            + 36.0 / gamma ** 2 * delta ** 2)


def f_g(x: float, gamma: float) -> tuple[float, float]:
    """Piecewise ``f`` and ``g``; the boundary ``x = gamma^(1/4)`` takes the upper branch."""
    gamma = check_gamma(gamma)
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x >= gamma ** 0.25:
        return (x + 1.0 / x) * (x + gamma / x), 2.0 * (x + 1.0 / x)
    return (math.sqrt(gamma) + 1.0) ** 2, 4.0


def rescaled_upper_bound(h2inf: float, h1inf: float, rho_b: float, gamma: float) -> float:
    """Upper bound on ``sigma_max(X)^2`` in terms of the dilation's entry norms.

    ``h2inf`` is the largest row norm of the dilation, ``h1inf`` its largest
    entry, ``gamma`` any value with
    ``min(|X|_{2,inf}, |X^T|_{2,inf}) <= sqrt(gamma) h2inf``.
    """
    gamma = check_gamma(gamma)
    if not h2inf > 0:
        raise ValueError("h2inf must be positive")
    if h1inf < 0 or rho_b < 0:
        raise ValueError("norms and radius must be nonnegative")
    f, g = f_g(rho_b / h2inf, gamma)
    return (h2inf ** 2 * f
            + 12.0 * gamma ** -1.25 * g * h2inf * h1inf
            + 36.0 / gamma ** 2 * h1inf ** 2)


@dataclass(frozen=True)
class LowerBoundValue:
    value: float
    raw: float
    degenerate_square: bool = False

    @property
    def vacuous(self) -> bool:
        return self.value <= 0.0

    def __float__(self):
        return self.value


def lower_bound_scale(gamma: float, delta: float) -> float:
    """The prefactor ``(sqrt(gamma) - gamma) / (sqrt(gamma) + delta)``."""
    r = math.sqrt(gamma)
    return (r - gamma) / (r + delta)


def lemma_lower_bound(beta: float, gamma: float, delta: float, rho_tilde_min: float,
                      C1: float, check_beta: bool = True) -> LowerBoundValue:
    """Lower bound on ``sigma_min(X)^2`` along the imaginary axis, clamped at 0.

    Uses the ``C_gamma delta^2`` form of the correction with
    ``C_gamma = 4 gamma^(-1/2) (C1 + delta/gamma) (sqrt(gamma)+delta)/(sqrt(gamma)-gamma)``.
    ``gamma = 1`` is the degenerate square case and returns 0.
    """
    gamma = float(gamma)
    if gamma == 1.0:
        return LowerBoundValue(0.0, 0.0, degenerate_square=True)
    gamma = check_gamma(gamma, strict_upper=True)
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    if C1 <= 0:
        raise ValueError("C1 must be positive")
    beta_floor = gamma ** 0.25 * (1.0 + math.sqrt(delta))
    if check_beta and beta < beta_floor * (1 - 1e-12):
        raise ValueError(f"beta={beta} is below gamma^(1/4)(1+sqrt(delta))={beta_floor}")
    r = math.sqrt(gamma)
    c2 = lower_bound_scale(gamma, delta)
    c_gamma = 4.0 / r * (C1 + delta / gamma) * (r + delta) / (r - gamma)
    b2 = beta * beta
    inner = b2 / (b2 + delta * delta) * rho_tilde_min - b2 - c_gamma * delta ** 2 - delta
    raw = c2 * inner
    return LowerBoundValue(max(raw, 0.0), raw)


# ---------------------------------------------------------------------------
# probability-level right-hand sides


def theorem_upper_rhs(q: float, gamma: float, N: int, K: float = 1.0,
                      constants: Mapping[str, float] | None = None) -> float:
    """``sqrt(gamma) + 1 + C1 (K + gamma^(-3/2)) eta / sqrt(1 v log eta)``, ``eta = sqrt(log N)/q``."""
    gamma = check_gamma(gamma)
    c = _constants(constants)
    if not q > 0 or N < 1:
        raise ValueError("q must be positive and N >= 1")
    eta = math.sqrt(math.log(N)) / q
    if eta == 0.0:
        return math.sqrt(gamma) + 1.0
    corr = eta / math.sqrt(max(1.0, math.log(eta)))
    return math.sqrt(gamma) + 1.0 + c["C1"] * (K + gamma ** -1.5) * corr


def q_regime(q: float, gamma: float, N: int, kappa: float) -> dict:
    """Whether ``gamma^(-1/4) <= q <= N^(1/10) kappa^(-1/9) gamma^(-1/18)``."""
    lo = gamma ** -0.25
    hi = N ** 0.1 * kappa ** (-1.0 / 9.0) * gamma ** (-1.0 / 18.0)
    return {"q_lower": lo, "q_upper": hi, "in_regime": lo <= q <= hi}


def theorem_lower_rhs(gamma: float, delta: float, rho_tilde_min: float,
                      constants: Mapping[str, float] | None = None) -> float:
    gamma = check_gamma(gamma, strict_upper=True)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    c = _constants(constants)
    inner = rho_tilde_min - math.sqrt(gamma) - c["C_prime"] * math.sqrt(delta)
    return lower_bound_scale(gamma, delta) * max(inner, 0.0)


def bennett_h(delta: float) -> float:
    return (1.0 + delta) * math.log1p(delta) - delta


def bennett_tail(q: float, rho: float, delta: float) -> float:
    """``exp(-q^2 rho h(delta))`` with ``h(d) = (1+d) log(1+d) - d``."""
    if q < 0 or rho < 0 or delta < 0:
        raise ValueError("arguments must be nonnegative")
    return math.exp(-q * q * rho * bennett_h(delta))


# ---------------------------------------------------------------------------
# instance-level quantities


@dataclass(frozen=True)
class DilationNorms:
    h2inf: float
    h1inf: float
    row_norm_max: float
    col_norm_max: float
    gamma: float


def dilation_norms(X) -> DilationNorms:
    """Row-norm and entry maxima of the dilation and the tightest admissible gamma."""
    a = as_matrix(X)
    row = float(np.sqrt((a * a).sum(axis=1)).max())
    col = float(np.sqrt((a * a).sum(axis=0)).max())
    h2 = max(row, col)
    h1 = float(np.abs(a).max())
    gamma = (min(row, col) / h2) ** 2 if h2 > 0 else 1.0
    return DilationNorms(h2, h1, row, col, gamma)


def check_hypotheses(X, stats: ProfileStats, delta: float, q: float | None = None,
                     C1: float | None = None) -> dict[str, bool]:
    """Evaluate the deterministic-lemma hypotheses on one matrix.

    Row sums of squares are compared against ``rho_tilde_max (1 + delta)``
    and column sums against ``rho_max (1 + delta)``; the smallest column
    sum against ``rho_tilde_min (1 - delta)``.
    """
    a = as_matrix(X)
    sq = a * a
    row = sq.sum(axis=1)
    col = sq.sum(axis=0)
    out = {
        "entry_bound": bool(np.abs(a).max() <= delta),
        "delta_range_upper": bool(0 <= delta <= math.sqrt(stats.gamma)),
        "delta_range_lower": bool(0 <= delta < 1),
        "row_envelope": bool(row.max() <= stats.rho_tilde_max * (1 + delta)),
        "col_envelope": bool(col.max() <= stats.rho_max * (1 + delta)),
        "rho_tilde_min_floor": bool(col.min() >= stats.rho_tilde_min * (1 - delta)),
        "xx_star_assumption": True,
    }
    if q is not None:
        out["sup_norm_q"] = bool(np.abs(a).max() <= 1.0 / q)
    if C1 is not None:
        out["operator_norm"] = bool(np.linalg.norm(a, 2) <= C1)
    nrm = dilation_norms(a)
    if nrm.h2inf > 0:
        out["xx_star_assumption"] = min(nrm.row_norm_max, nrm.col_norm_max) <= (
            math.sqrt(stats.gamma) * nrm.h2inf * (1 + 1e-12))
    return out


UPPER_KEYS = ("entry_bound", "delta_range_upper", "row_envelope", "col_envelope")
LOWER_KEYS = ("entry_bound", "delta_range_lower", "row_envelope", "col_envelope",
              "rho_tilde_min_floor")


def minimal_delta(X, stats: ProfileStats, lower: bool = False) -> float:
    """Smallest ``delta`` for which the entry and envelope hypotheses hold.

    With ``lower=True`` the column floor ``rho_tilde_min (1 - delta)`` is
    included. The returned value may still violate the admissible range of
    ``delta``; callers check that separately.
    """
    a = as_matrix(X)
    sq = a * a
    row, col = sq.sum(axis=1), sq.sum(axis=0)
    cand = [float(np.abs(a).max()),
            row.max() / stats.rho_tilde_max - 1.0,
            col.max() / stats.rho_max - 1.0]
    if lower and stats.rho_tilde_min > 0:
        cand.append(1.0 - col.min() / stats.rho_tilde_min)
    # nudge up so the non-strict inequalities survive rounding
    return float(np.nextafter(max(0.0, *cand), np.inf))


def evaluate_instance(X, stats: ProfileStats, rho_b: float, instance_id: str = "",
                      constants: Mapping[str, float] | None = None) -> dict[str, BoundReport]:
    """Compare the three deterministic bounds with the spectrum of one matrix.

    ``delta`` is set per instance to the smallest value meeting the entry and
    envelope hypotheses, and the spectral parameter to
    ``max(gamma^(1/4)(1+sqrt(delta)), rho_b)``. The norm-rescaled bound uses
    the measured ``gamma`` of the dilation's row norms. The lower bound needs
    ``n >= m`` and ``gamma < 1``; it is omitted otherwise.
    """
    a = as_matrix(X)
    consts = _constants(constants)
    sv = np.linalg.svd(a, compute_uv=False)
    smax2 = float(sv[0]) ** 2
    smin2 = float(sv[-1]) ** 2
    g = stats.gamma
    out = {}

    delta = minimal_delta(a, stats)
    hyp = check_hypotheses(a, stats, delta)
    hyp_u = {k: hyp[k] for k in UPPER_KEYS}
    lam = max(g ** 0.25 * (1 + math.sqrt(delta)), rho_b)
    bound = lemma_upper_bound(lam, g, delta) if all(hyp_u.values()) else math.nan
    out["upper_lemma"] = BoundReport(Direction.UPPER_ON_SIGMA_MAX_SQ, bound, smax2, hyp_u,
                                     consts, False, instance_id,
                                     {"delta": delta, "lambda": lam, "rho_b": rho_b})

    nrm = dilation_norms(a)
    if nrm.h2inf > 0:
        bound = rescaled_upper_bound(nrm.h2inf, nrm.h1inf, rho_b, nrm.gamma)
        out["rescaled"] = BoundReport(Direction.UPPER_ON_SIGMA_MAX_SQ, bound, smax2,
                                      {"xx_star_assumption": True}, consts, False, instance_id,
                                      {"h2inf": nrm.h2inf, "h1inf": nrm.h1inf,
                                       "gamma_measured": nrm.gamma, "rho_b": rho_b})

    if a.shape[0] >= a.shape[1] and 0 < g < 1:
        delta = minimal_delta(a, stats, lower=True)
        hyp = check_hypotheses(a, stats, delta)
        hyp_l = {k: hyp[k] for k in LOWER_KEYS}
        beta = max(g ** 0.25 * (1 + math.sqrt(delta)), rho_b)
        if all(hyp_l.values()):
            lb = lemma_lower_bound(beta, g, delta, stats.rho_tilde_min, float(sv[0]))
            value, raw = lb.value, lb.raw
        else:
            value = raw = math.nan
        out["lower_lemma"] = BoundReport(Direction.LOWER_ON_SIGMA_MIN_SQ, value, smin2, hyp_l,
                                         consts, not value > 0, instance_id,
                                         {"delta": delta, "beta": beta, "raw": raw,
                                          "C1": float(sv[0]), "rho_b": rho_b})
    return out


def write_reports_csv(reports, path) -> None:
    """Write reports as ``instance_id,direction,bound,observed,margin,hypotheses_ok`` rows."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in reports:
            w.writerow(r.csv_row())

"""Config-driven Monte Carlo experiments with deterministic parallel seeding.

Each trial draws its seed from ``(config.seed, trial_id)`` alone, so the set
of records, and every byte written by :func:`emit_report`, is independent of
the number of workers.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import bounds as bd
from .iharabass import (SingularLambdaError, ib_discriminant, imaginary_axis_scan,
                        verify_ib_on_spectrum)
from .model import (ModelKind, SampledMatrix, make_bipartite_profile, make_bounded_profile,
                    profile_from_dict, profile_stats, sample_bounded_model,
                    sample_centered_adjacency)
from .nonbacktracking import BudgetExceededError, build_nb_operator, spectral_radius, trace_powers
from .spectra import mp_edges, singular_values

logger = logging.getLogger(__name__)

__all__ = [
    "Experiment",
    "ConfigError",
    "ExperimentConfig",
    "TrialRecord",
    "split_seed",
    "grid_points",
    "run_trials",
    "summarize",
    "emit_report",
    "experiment_bai_yin",
    "experiment_rho_b",
    "experiment_trace_growth",
    "experiment_ihara_fuzz",
    "experiment_bound_tightness",
]

THREADS_ENV = "NBSPECTRA_THREADS"


class Experiment(str, enum.Enum):
    BAI_YIN = "bai_yin"
    RHO_B = "rho_b"
    IHARA_FUZZ = "ihara_fuzz"
    BOUND_TIGHTNESS = "bound_tightness"
    TRACE_GROWTH = "trace_growth"


class ConfigError(ValueError):
    pass


_DIM_KEYS = ("n", "m", "y", "p", "d", "s", "q", "model")
_HIDDEN_POINT_KEYS = ("profile", "matrix")


@dataclass
class ExperimentConfig:
    experiment: Experiment
    trials: int = 1
    seed: int = 0
    grid: dict = field(default_factory=dict)
    profile: dict | None = None
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    output: str | None = None
    parallelism: int = 1

    def __post_init__(self):
        try:
            self.experiment = Experiment(self.experiment)
        except ValueError as exc:
            raise ConfigError(f"unknown experiment {self.experiment!r}") from exc
        if int(self.trials) < 1:
            raise ConfigError("trials must be >= 1")
        self.trials = int(self.trials)
        self.seed = int(self.seed)
        self.parallelism = max(1, int(self.parallelism))
        if not isinstance(self.grid, dict):
            raise ConfigError("grid must be a mapping of named lists")
        for key, vals in self.grid.items():
            if not isinstance(vals, (list, tuple)) or len(vals) == 0:
                raise ConfigError(f"grid entry {key!r} must be a nonempty list")
        if self.experiment is not Experiment.IHARA_FUZZ and not self.grid and self.profile is None:
            raise ConfigError("config needs a nonempty grid or a profile")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {"experiment", "trials", "seed", "grid", "profile", "tolerances", "options",
                 "output", "parallelism"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in doc:
            raise ConfigError("config needs an 'experiment'")
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(doc)

    def probe_options(self) -> dict:
        """``options`` merged with the non-dimension grid lists (eps, l, beta, ...)."""
        out = dict(self.options)
        out.update({k: v for k, v in self.grid.items() if k not in _DIM_KEYS})
        return out

    def effective_parallelism(self) -> int:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                return max(1, int(env))
            except ValueError as exc:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
        return self.parallelism


@dataclass
class TrialRecord:
    trial_id: int
    grid_index: int
    seed_used: int
    status: str
    point: dict
    metrics: dict = field(default_factory=dict)
    error: str = ""
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def split_seed(seed: int, trial_id: int) -> int:
    """Per-trial 63-bit seed derived from the base seed and trial index only."""
    state = np.random.SeedSequence([int(seed) % (1 << 64), int(trial_id)]).generate_state(
        1, np.uint64)[0]
    return int(state) & ((1 << 63) - 1)


def grid_points(config: ExperimentConfig) -> list[dict]:
    """Cartesian product of the dimension lists in ``config.grid``.

    ``m`` may be given through the aspect ratio ``y`` and ``p`` through the
    expected degree ``d = n p``.
    """
    dims = {k: v for k, v in config.grid.items() if k in _DIM_KEYS}
    if not dims:
        if config.profile is not None:
            prof = config.profile
            if "matrix" in prof:
                x = np.asarray(prof["matrix"], dtype=float)
                if x.ndim != 2:
                    raise ConfigError("fixed 'matrix' must be two-dimensional")
                return [{"n": x.shape[0], "m": x.shape[1], "matrix": x.tolist()}]
            try:
                profile_from_dict(prof)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"invalid profile: {exc}") from exc
            return [{"n": int(prof["n"]), "m": int(prof["m"]), "profile": prof}]
        return [{}]
    keys = sorted(dims)
    points = []
    for combo in itertools.product(*(dims[k] for k in keys)):
        pt = dict(zip(keys, combo))
        if "n" not in pt:
            raise ConfigError("grid needs 'n'")
        n = int(pt["n"])
        if "m" not in pt:
            if "y" not in pt:
                raise ConfigError("grid needs 'm' or 'y'")
            pt["m"] = max(1, int(round(float(pt["y"]) * n)))
        pt["n"], pt["m"] = n, int(pt["m"])
        model = pt.get("model", ModelKind.BIPARTITE_BERNOULLI.value)
        if model == ModelKind.BIPARTITE_BERNOULLI.value and "p" not in pt:
            if "d" not in pt:
                raise ConfigError("grid needs 'p' or 'd' for the Bernoulli model")
            pt["p"] = float(pt["d"]) / n
        if model == ModelKind.BIPARTITE_BERNOULLI.value and not 0 <= float(pt["p"]) <= 1:
            raise ConfigError(f"probability {pt['p']} outside [0, 1]")
        if model == ModelKind.BOUNDED_GENERAL.value and "q" not in pt:
            raise ConfigError("bounded model needs 'q'")
        points.append(pt)
    return points


# ---------------------------------------------------------------------------
# per-trial work


def _sample(point: dict, seed: int):
    if "matrix" in point:
        # fixed instance; its profile is the entrywise square
        x = np.asarray(point["matrix"], dtype=float)
        prof = make_bounded_profile(*x.shape, x * x)
        q = 1.0 / float(np.abs(x).max()) if np.any(x) else math.inf
        return prof, SampledMatrix(x, q, int(seed), prof.profile_id)
    if "profile" in point:
        prof = profile_from_dict(point["profile"])
    elif point.get("model", ModelKind.BIPARTITE_BERNOULLI.value) == ModelKind.BOUNDED_GENERAL.value:
        q = float(point["q"])
        s = float(point["s"]) if "s" in point else 1.0 / q ** 2
        prof = make_bounded_profile(point["n"], point["m"], s)
        return prof, sample_bounded_model(prof, q, seed)
    else:
        prof = make_bipartite_profile(point["n"], point["m"], float(point["p"]))
    if prof.model_kind is ModelKind.BOUNDED_GENERAL:
        q = float(point.get("q", profile_stats(prof).q))
        return prof, sample_bounded_model(prof, q, seed)
    return prof, sample_centered_adjacency(prof, seed)


def _radius(x, options: dict, seed: int):
    return spectral_radius(
        build_nb_operator(x),
        dense_threshold=int(options.get("dense_threshold", 2000)),
        tol=float(options.get("radius_tol", 1e-3)),
        max_power_steps=int(options.get("max_power_steps", 4096)),
        seed=seed,
    )


def _trial_bai_yin(point, options, seed):
    prof, xs = _sample(point, seed)
    st = profile_stats(prof)
    sv = singular_values(xs)
    # X is already scaled by 1/sqrt(d), so these are sigma(A - EA)/sqrt(d)
    return {"d": st.d, "gamma": st.gamma, "sigma_max_sqrt_d": sv.sigma_max,
            "sigma_min_sqrt_d": sv.sigma_min, "residual": sv.residual}


def _trial_rho_b(point, options, seed):
    prof, xs = _sample(point, seed)
    st = profile_stats(prof)
    est = _radius(xs.entries, options, seed)
    out = {"d": st.d, "gamma": st.gamma, "rho_b": est.rho, "rho_converged": bool(est.converged),
           "rho_method": est.method.value, "rho_iterations": est.iterations}
    if not est.converged:
        out["status"] = "not_converged"
    return out


def _trial_trace_growth(point, options, seed):
    prof, xs = _sample(point, seed)
    st = profile_stats(prof)
    l_max = int(options.get("l_max", max(options.get("l", [8]))))
    B = build_nb_operator(xs.entries)
    budget = float(options.get("trace_budget", 2e11))
    while True:
        try:
            F = trace_powers(B, l_max, budget=budget)
            break
        except BudgetExceededError:
            if l_max <= 1:
                raise
            logger.warning("trace budget exceeded at l=%d; truncating", l_max)
            l_max -= 1
    out = {"d": st.d, "gamma": st.gamma, "q": st.q, "l_max": l_max}
    for l, v in enumerate(F, start=1):
        out[f"F_{l}"] = float(v)
    return out


def _trial_ihara_fuzz(point, options, seed):
    rng = np.random.default_rng(seed)
    max_v = int(options.get("max_vertices", 10))
    densities = options.get("densities", [0.3, 0.6, 1.0])
    n = int(rng.integers(1, max_v))
    m = int(rng.integers(1, max_v - n + 1))
    density = float(rng.choice(densities))
    x = rng.standard_normal((n, m)) * (rng.random((n, m)) < density)
    rep = verify_ib_on_spectrum(x, tol=float(options.get("tol", 1e-8)))
    # block/full agreement at random complex points, off the spectrum almost surely
    n_extra = int(options.get("complex_probes", 4))
    extra_checked = extra_bad = 0
    extra_gap = 0.0
    for _ in range(n_extra):
        lam = complex(*rng.uniform(-3.0, 3.0, size=2))
        try:
            ev = ib_discriminant(x, lam)
        except SingularLambdaError:
            continue
        if ev.block_available:
            extra_checked += 1
            extra_gap = max(extra_gap, ev.consistency_gap)
            extra_bad += ev.consistency_gap > 1e-8 + 1e-8 * abs(ev.log_abs_det)
    return {"n_rows": n, "n_cols": m, "density": density, "n_eigenvalues": rep.n_eigenvalues,
            "n_checked": rep.n_checked, "n_skipped": len(rep.skipped),
            "root_violations": len(rep.root_violations), "worst_root_ratio": rep.worst_root_ratio,
            "n_probes": rep.n_probes, "probe_violations": len(rep.probe_violations),
            "min_probe_indicator": rep.min_probe_indicator,
            "block_checked": rep.block_checked + extra_checked,
            "block_violations": len(rep.block_violations) + extra_bad,
            "max_block_gap": max(rep.max_block_gap, extra_gap),
            "block_checked_complex": extra_checked}


def _trial_bound_tightness(point, options, seed):
    prof, xs = _sample(point, seed)
    st = profile_stats(prof)
    x = xs.entries
    est = _radius(x, options, seed)
    reps = bd.evaluate_instance(x, st, est.rho, instance_id=str(seed))
    up = reps["upper_lemma"]
    out = {"d": st.d, "gamma": st.gamma, "rho_b": est.rho, "rho_converged": bool(est.converged),
           "sigma_max_sq": up.observed_value, "delta_upper": up.params["delta"],
           "upper_hypotheses_ok": all(up.hypotheses_ok.values())}
    if out["upper_hypotheses_ok"]:
        out["upper_lemma_bound"] = up.bound_value
        out["upper_lemma_margin"] = up.margin
    if "rescaled" in reps:
        out["rescaled_bound"] = reps["rescaled"].bound_value
        out["rescaled_margin"] = reps["rescaled"].margin
    if "lower_lemma" in reps:
        lo = reps["lower_lemma"]
        out["sigma_min_sq"] = lo.observed_value
        out["delta_lower"] = lo.params["delta"]
        out["lower_hypotheses_ok"] = all(lo.hypotheses_ok.values())
        if out["lower_hypotheses_ok"]:
            beta = lo.params["beta"]
            out["beta"] = beta
            out["lower_lemma_raw"] = lo.params["raw"]
            out["lower_lemma_bound"] = lo.bound_value
            out["lower_positive"] = bool(lo.params["raw"] > 0)
            out["lower_margin"] = lo.margin
            row = imaginary_axis_scan(x, [beta]).rows[0]
            out["scan_psd"] = bool(row.psd)
            out["scan_min_m1"] = row.min_m1
    if not est.converged:
        out["status"] = "not_converged"
    return out


_TRIALS: dict[Experiment, Callable] = {
    Experiment.BAI_YIN: _trial_bai_yin,
    Experiment.RHO_B: _trial_rho_b,
    Experiment.TRACE_GROWTH: _trial_trace_growth,
    Experiment.IHARA_FUZZ: _trial_ihara_fuzz,
    Experiment.BOUND_TIGHTNESS: _trial_bound_tightness,
}


def _run_one(task) -> TrialRecord:
    experiment, trial_id, grid_index, point, options, seed = task
    t0 = time.perf_counter()
    try:
        metrics = _TRIALS[experiment](point, options, seed)
        status = metrics.pop("status", "ok")
        err = ""
    except Exception as exc:  # a failed trial is recorded, never fatal
        metrics, status, err = {}, "failed", f"{type(exc).__name__}: {exc}"
    pt = {k: v for k, v in point.items() if k not in _HIDDEN_POINT_KEYS}
    return TrialRecord(trial_id, grid_index, seed, status, pt, metrics, err,
                       time.perf_counter() - t0)


def run_trials(config: ExperimentConfig) -> list[TrialRecord]:
    """Run ``config.trials`` trials at every grid point; records sorted by ``trial_id``."""
    points = grid_points(config)
    tasks = []
    for gi, pt in enumerate(points):
        for t in range(config.trials):
            tid = gi * config.trials + t
            tasks.append((config.experiment, tid, gi, pt, config.probe_options(),
                          split_seed(config.seed, tid)))
    workers = config.effective_parallelism()
    if workers == 1 or len(tasks) == 1:
        records = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, tasks))
    return sorted(records, key=lambda r: r.trial_id)


# ---------------------------------------------------------------------------
# summaries


def _stats(vals, prefix: str) -> dict:
    a = np.asarray(vals, dtype=float)
    if a.size == 0:
        return {f"{prefix}_{k}": math.nan for k in ("mean", "median", "q05", "q95")}
    return {f"{prefix}_mean": float(a.mean()), f"{prefix}_median": float(np.median(a)),
            f"{prefix}_q05": float(np.quantile(a, 0.05)), f"{prefix}_q95": float(np.quantile(a, 0.95))}


def _group(records):
    groups: dict[int, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault(r.grid_index, []).append(r)
    return groups


def _base_row(gi, recs):
    pt = recs[0].point
    row = {"grid_index": gi}
    row.update({k: pt[k] for k in sorted(pt)})
    row["n_trials"] = len(recs)
    row["n_ok"] = sum(r.ok for r in recs)
    row["n_failed"] = sum(r.status == "failed" for r in recs)
    return row


def _summary_bai_yin(gi, recs):
    row = _base_row(gi, recs)
    ok = [r for r in recs if r.ok]
    smax = [r.metrics["sigma_max_sqrt_d"] for r in ok]
    smin = [r.metrics["sigma_min_sqrt_d"] for r in ok]
    row.update(_stats(smax, "sigma_max_sqrt_d"))
    row.update(_stats(smin, "sigma_min_sqrt_d"))
    if ok:
        gamma = ok[0].metrics["gamma"]
        lo, hi = mp_edges(gamma)
        row["gamma"] = gamma
        row["mp_lower"], row["mp_upper"] = lo, hi
        row["abs_dev_upper_median"] = float(np.median(np.abs(np.asarray(smax) - hi)))
        row["abs_dev_lower_median"] = float(np.median(np.abs(np.asarray(smin) - lo)))
    return [row]


def _summary_rho_b(gi, recs, options):
    row = _base_row(gi, recs)
    conv = [r for r in recs if r.ok]
    row["n_not_converged"] = sum(r.status == "not_converged" for r in recs)
    rho = np.array([r.metrics["rho_b"] for r in conv])
    row.update(_stats(rho, "rho_b"))
    row["n_zero"] = int(np.sum(rho == 0.0))
    if conv:
        g14 = conv[0].metrics["gamma"] ** 0.25
        row["gamma_quarter"] = g14
        row["abs_dev_median"] = float(np.median(np.abs(rho - g14)))
        for eps in options.get("eps", [0.1, 0.3, 0.5]):
            row[f"exceed_eps_{eps}"] = float(np.mean(rho > g14 * (1 + eps)))
    return [row]


def _summary_trace_growth(gi, recs):
    ok = [r for r in recs if r.ok]
    base = _base_row(gi, recs)
    if not ok:
        return [base]
    l_max = min(r.metrics["l_max"] for r in ok)
    n, m = recs[0].point["n"], recs[0].point["m"]
    q, gamma = ok[0].metrics["q"], ok[0].metrics["gamma"]
    F = np.array([[r.metrics[f"F_{l}"] for l in range(1, l_max + 1)] for r in ok])
    rows = []
    for l in range(1, l_max + 1):
        row = dict(base)
        mean_f = float(F[:, l - 1].mean())
        row["l"] = l
        row["F_mean"] = mean_f
        row["normalized"] = mean_f / (l ** 4 * q * q * m * n * gamma ** ((l - 1) / 2))
        if l >= 2:
            with np.errstate(divide="ignore", invalid="ignore"):
                per_trial = np.sqrt(F[:, l - 1] / F[:, l - 2])
            row["r_median"] = float(np.median(per_trial))
            prev = float(F[:, l - 2].mean())
            row["r_of_means"] = math.sqrt(mean_f / prev) if prev > 0 else math.nan
        else:
            row["r_median"] = math.nan
            row["r_of_means"] = math.nan
        row["gamma_quarter"] = gamma ** 0.25
        rows.append(row)
    return rows


def _summary_ihara(gi, recs):
    row = _base_row(gi, recs)
    ok = [r for r in recs if r.ok]
    for key in ("n_checked", "n_skipped", "root_violations", "n_probes", "probe_violations",
                "block_checked", "block_violations"):
        row[key] = int(sum(r.metrics[key] for r in ok))
    row["worst_root_ratio"] = max((r.metrics["worst_root_ratio"] for r in ok), default=0.0)
    row["min_probe_indicator"] = min((r.metrics["min_probe_indicator"] for r in ok), default=math.inf)
    row["max_block_gap"] = max((r.metrics["max_block_gap"] for r in ok), default=0.0)
    return [row]


def _summary_bounds(gi, recs):
    row = _base_row(gi, recs)
    ok = [r for r in recs if r.status in ("ok", "not_converged")]
    up = [r for r in ok if r.metrics.get("upper_hypotheses_ok") and r.metrics["rho_converged"]]
    row["upper_checked"] = len(up)
    row["upper_violations"] = sum(r.metrics["upper_lemma_margin"] < 0 for r in up)
    row["upper_min_margin"] = min((r.metrics["upper_lemma_margin"] for r in up), default=math.nan)
    res = [r for r in ok if "rescaled_margin" in r.metrics and r.metrics["rho_converged"]]
    row["rescaled_checked"] = len(res)
    row["rescaled_violations"] = sum(r.metrics["rescaled_margin"] < 0 for r in res)
    lo = [r for r in ok if r.metrics.get("lower_hypotheses_ok") and r.metrics["rho_converged"]]
    row["lower_checked"] = len(lo)
    row["lower_positive"] = sum(r.metrics["lower_positive"] for r in lo)
    row["lower_violations"] = sum(r.metrics["lower_positive"] and r.metrics["lower_margin"] < 0
                                  for r in lo)
    row["scan_psd_failures"] = sum(not r.metrics["scan_psd"] for r in lo
                                   if r.metrics["scan_min_m1"] > 0)
    return [row]


def summarize(records: list[TrialRecord], experiment: Experiment,
              options: dict | None = None) -> dict[int, list[dict]]:
    """Summary rows keyed by grid index."""
    experiment = Experiment(experiment)
    options = options or {}
    out = {}
    for gi, recs in sorted(_group(records).items()):
        if experiment is Experiment.BAI_YIN:
            out[gi] = _summary_bai_yin(gi, recs)
        elif experiment is Experiment.RHO_B:
            out[gi] = _summary_rho_b(gi, recs, options)
        elif experiment is Experiment.TRACE_GROWTH:
            out[gi] = _summary_trace_growth(gi, recs)
        elif experiment is Experiment.IHARA_FUZZ:
            out[gi] = _summary_ihara(gi, recs)
        else:
            out[gi] = _summary_bounds(gi, recs)
    return out


def experiment_bai_yin(config: ExperimentConfig):
    return _experiment(config, Experiment.BAI_YIN)


def experiment_rho_b(config: ExperimentConfig):
    return _experiment(config, Experiment.RHO_B)


def experiment_trace_growth(config: ExperimentConfig):
    return _experiment(config, Experiment.TRACE_GROWTH)


def experiment_ihara_fuzz(config: ExperimentConfig):
    return _experiment(config, Experiment.IHARA_FUZZ)


def experiment_bound_tightness(config: ExperimentConfig):
    return _experiment(config, Experiment.BOUND_TIGHTNESS)


def _experiment(config: ExperimentConfig, kind: Experiment):
    if config.experiment is not kind:
        raise ConfigError(f"config is for {config.experiment.value}, not {kind.value}")
    records = run_trials(config)
    return records, summarize(records, kind, config.probe_options())


# ---------------------------------------------------------------------------
# output


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _csv_text(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) if c in row else "" for c in columns])
    return buf.getvalue()


def _trial_rows(records: list[TrialRecord], include_timing: bool):
    point_keys = sorted({k for r in records for k in r.point})
    metric_keys = sorted({k for r in records for k in r.metrics})
    cols = ["trial_id", "grid_index", "seed_used", "status", "error"]
    cols += [f"point_{k}" for k in point_keys] + metric_keys
    if include_timing:
        cols.append("elapsed")
    rows = []
    for r in records:
        row = {"trial_id": r.trial_id, "grid_index": r.grid_index, "seed_used": r.seed_used,
               "status": r.status, "error": r.error}
        row.update({f"point_{k}": v for k, v in r.point.items()})
        row.update(r.metrics)
        if include_timing:
            row["elapsed"] = r.elapsed
        rows.append(row)
    return rows, cols


def _jsonable(v):
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def emit_report(records: list[TrialRecord], out_dir, fmt: str = "csv",
                experiment: Experiment | str | None = None, options: dict | None = None,
                include_timing: bool = False) -> list[Path]:
    """Write ``trials.<fmt>`` plus one ``summary_gNNN.<fmt>`` per grid point.

    Output is byte-deterministic for identical records unless
    ``include_timing`` adds wall-clock columns.
    """
    if not records:
        raise ValueError("no records to emit")
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    records = sorted(records, key=lambda r: r.trial_id)
    summaries = summarize(records, experiment, options) if experiment is not None else {}
    rows, cols = _trial_rows(records, include_timing)
    files: dict[Path, str] = {}
    if fmt == "csv":
        files[out / "trials.csv"] = _csv_text(rows, cols)
        for gi, srows in summaries.items():
            scols = list(dict.fromkeys(k for r in srows for k in r))
            files[out / f"summary_g{gi:03d}.csv"] = _csv_text(srows, scols)
    else:
        clean = [{k: _jsonable(v) for k, v in r.items()} for r in rows]
        files[out / "trials.json"] = json.dumps(clean, indent=1, sort_keys=True) + "\n"
        for gi, srows in summaries.items():
            clean = [{k: _jsonable(v) for k, v in r.items()} for r in srows]
            files[out / f"summary_g{gi:03d}.json"] = json.dumps(clean, indent=1, sort_keys=True) + "\n"
    try:
        out.mkdir(parents=True, exist_ok=True)
        for path, text in files.items():
            path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return list(files)

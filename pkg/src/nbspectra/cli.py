"""Command-line entry point ``nbspectra``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .harness import ConfigError, Experiment, ExperimentConfig, emit_report, run_trials, summarize
from .model import (ModelKind, profile_from_dict, profile_stats, profile_to_dict,
                    sample_bounded_model, sample_centered_adjacency, write_matrix_csv)

logger = logging.getLogger("nbspectra")

EXIT_OK, EXIT_CONFIG, EXIT_ASSERT, EXIT_IO = 0, 1, 2, 3

_EXPERIMENT_FOR = {
    "rho-b": Experiment.RHO_B,
    "ihara-check": Experiment.IHARA_FUZZ,
    "bounds-check": Experiment.BOUND_TIGHTNESS,
    "bai-yin": Experiment.BAI_YIN,
    "trace-growth": Experiment.TRACE_GROWTH,
}
COMMANDS = ("sample", "stats", *_EXPERIMENT_FOR)


class AssertionSuiteFailure(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nbspectra", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--parallelism", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _read_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def _profile_doc(doc: dict) -> dict:
    prof = doc.get("profile", doc) if "experiment" in doc or "profile" in doc else doc
    if not isinstance(prof, dict) or "n" not in prof or "m" not in prof:
        raise ConfigError("config needs a profile document with n, m and p")
    return prof


def _cmd_sample(doc, args, out: Path) -> int:
    prof_doc = _profile_doc(doc)
    try:
        prof = profile_from_dict(prof_doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid profile: {exc}") from exc
    seed = args.seed if args.seed is not None else int(prof_doc.get("seed", doc.get("seed", 0)))
    if prof.model_kind is ModelKind.BIPARTITE_BERNOULLI:
        x = sample_centered_adjacency(prof, seed)
    else:
        q = float(prof_doc.get("q", profile_stats(prof).q))
        try:
            x = sample_bounded_model(prof, q, seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(x.entries, out / "matrix.csv")
    meta = {"profile": profile_to_dict(prof, seed), "profile_id": x.profile_id,
            "q_bound": x.q_bound, "seed": x.seed}
    (out / "sample.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(out / "matrix.csv")
    return EXIT_OK


def _cmd_stats(doc, args, out: Path) -> int:
    try:
        prof = profile_from_dict(_profile_doc(doc))
        st = profile_stats(prof)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid profile: {exc}") from exc
    text = json.dumps(asdict(st), indent=2, sort_keys=True) + "\n"
    out.mkdir(parents=True, exist_ok=True)
    (out / "stats.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _violations(kind: Experiment, records, summaries, tolerances: dict) -> list[str]:
    msgs = []
    rows = [r for rs in summaries.values() for r in rs]
    if kind is Experiment.IHARA_FUZZ:
        for r in rows:
            bad = r["root_violations"] + r["probe_violations"] + r["block_violations"]
            if bad or r["n_failed"]:
                msgs.append(f"grid {r['grid_index']}: {bad} identity violations, "
                            f"{r['n_failed']} failed trials")
    elif kind is Experiment.BOUND_TIGHTNESS:
        for r in rows:
            bad = r["upper_violations"] + r["rescaled_violations"] + r["lower_violations"]
            if bad:
                msgs.append(f"grid {r['grid_index']}: {bad} bound violations")
    elif kind is Experiment.BAI_YIN and "edge_abs" in tolerances:
        tol = float(tolerances["edge_abs"])
        for r in rows:
            if not (abs(r["sigma_max_sqrt_d_mean"] - r["mp_upper"]) <= tol
                    and abs(r["sigma_min_sqrt_d_mean"] - r["mp_lower"]) <= tol):
                msgs.append(f"grid {r['grid_index']}: mean edges off by more than {tol}")
    elif kind is Experiment.RHO_B and "max_exceedance" in tolerances:
        eps = tolerances.get("eps", 0.3)
        for r in rows:
            freq = r.get(f"exceed_eps_{eps}")
            if freq is None or freq > float(tolerances["max_exceedance"]):
                msgs.append(f"grid {r['grid_index']}: exceedance {freq} at eps={eps}")
    elif kind is Experiment.TRACE_GROWTH and "growth_factor" in tolerances:
        fac = float(tolerances["growth_factor"])
        for r in rows:
            if r.get("l", 0) >= 3 and not r["r_median"] <= r["gamma_quarter"] * fac:
                msgs.append(f"grid {r['grid_index']} l={r['l']}: median growth {r['r_median']}")
    return msgs


def _cmd_experiment(doc, args, out: Path) -> int:
    kind = _EXPERIMENT_FOR[args.command]
    doc = dict(doc)
    if "experiment" in doc and Experiment(doc["experiment"]) is not kind:
        raise ConfigError(f"config is for {doc['experiment']}, command runs {kind.value}")
    doc["experiment"] = kind.value
    for key in ("seed", "trials", "parallelism"):
        val = getattr(args, key)
        if val is not None:
            doc[key] = val
    try:
        config = ExperimentConfig.from_dict(doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    records = run_trials(config)
    summaries = summarize(records, kind, config.probe_options())
    emit_report(records, out, fmt=args.format, experiment=kind, options=config.probe_options())
    n_failed = sum(r.status == "failed" for r in records)
    logger.info("%d trials, %d failed; report in %s", len(records), n_failed, out)
    msgs = _violations(kind, records, summaries, config.tolerances)
    if msgs:
        raise AssertionSuiteFailure("; ".join(msgs))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        doc = _read_config(args.config)
        out = Path(args.out or doc.get("output") or "nbspectra_out")
        if args.command == "sample":
            return _cmd_sample(doc, args, out)
        if args.command == "stats":
            return _cmd_stats(doc, args, out)
        return _cmd_experiment(doc, args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssertionSuiteFailure as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: single runs, seed batches, beta sweeps and coverage searches.

Exit codes: 0 success, 1 invalid input or config, 2 a run hit an Emergency tick.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import world
from .metrics import aggregate
from .safety import FilterStatus

log = logging.getLogger("hcbf")

EXIT_OK, EXIT_CONFIG, EXIT_EMERGENCY = 0, 1, 2
MAX_QP_DUMPS = 100


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def step_log_header(n: int, obstacle_ids) -> list[str]:
    cols = ["t"] + [f"q{i}" for i in range(n)] + [f"qd_safe{i}" for i in range(n)] + [f"qd_perf{i}" for i in range(n)]
    for oid in obstacle_ids:
        cols += [f"{oid}_px", f"{oid}_py", f"{oid}_pz", f"{oid}_h_min", f"{oid}_dist", f"{oid}_delta"]
    return cols + ["status", "solve_us"]


def step_log_row(r) -> list[str]:
    row = [r.t, *r.q, *r.q_dot_safe, *r.q_dot_perf]
    for o in r.obstacles:
        row += [*o.position, o.h_min, o.distance, o.delta]
    row += [str(r.status), r.solve_time * 1e6]
    return [_fmt(x) for x in row]


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, default=_json_safe, allow_nan=False) + "\n")


def _json_safe(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _finite_or_none(d):
    if isinstance(d, dict):
        return {k: _finite_or_none(v) for k, v in d.items()}
    if isinstance(d, float) and not math.isfinite(d):
        return None
    return d


# ---------------------------------------------------------------------------
# config loading shared by every command


def _load(args) -> tuple[config_mod.ScenarioConfig, Path]:
    if args.config is None:
        raise config_mod.ConfigError("--config", "a config file is required")
    cfg = config_mod.load(args.config)
    return cfg, Path(args.config).resolve().parent


def _run_records(cfg, seed, base_dir, dump_dir: Path | None = None):
    sim = world.initial_state(cfg, seed, base_dir)
    ctl = world.make_controllers(cfg, sim.q)
    dt = cfg.sim.dt
    records, dumps = [], 0
    ticks = world.n_ticks(cfg)
    for k in range(ticks):
        r = world.step(sim, ctl, dt)
        records.append(r)
        if dump_dir is not None and ctl.safety.last_problem is not None:
            if (r.status is FilterStatus.EMERGENCY and dumps < MAX_QP_DUMPS) or k == ticks - 1:
                (dump_dir / f"qp_tick{k:07d}.txt").write_text(ctl.safety.last_problem.dump())
                dumps += 1
    return records


def cmd_run(args) -> int:
    cfg, base = _load(args)
    seed = cfg.sim.seed if args.seed is None else args.seed
    cfg = cfg.with_seed(seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_dir = None
    if args.dump_qp:
        dump_dir = out / "qp"
        dump_dir.mkdir(exist_ok=True)
    (out / "config.json").write_text(config_mod.effective_json(cfg))
    records = _run_records(cfg, seed, base, dump_dir)
    metrics = aggregate(records, cfg)
    with open(out / "steps.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(step_log_header(cfg.chain.n, [o.id for o in cfg.obstacles]))
        for r in records:
            w.writerow(step_log_row(r))
    summary = metrics.to_dict()
    summary["seed"] = seed
    _write_json(out / "metrics.json", _finite_or_none(summary))
    log.info("seed %d: rmse %.4f, emergency ticks %d", seed, metrics.rmse, metrics.emergency_ticks)
    if metrics.emergency_ticks:
        print(f"{metrics.emergency_ticks} emergency tick(s); see {out / 'steps.csv'}", file=sys.stderr)
        return EXIT_EMERGENCY
    return EXIT_OK


# ---------------------------------------------------------------------------
# batch


def batch_row(raw: dict, base_dir: str, seed: int, obstacle_ids) -> dict:
    row = {"seed": seed}
    try:
        cfg = config_mod.from_dict(raw).with_seed(seed)
        _, m = world.run_scenario(cfg, seed, Path(base_dir))
        row["rmse"] = m.rmse
        for oid in obstacle_ids:
            row[f"d_min_{oid}"] = m.d_min[oid]
            row[f"h_min_{oid}"] = m.h_min[oid]
            row[f"delta_max_{oid}"] = m.delta_max[oid]
            row[f"violation_{oid}"] = m.violation[oid]
        row["emergency_ticks"] = m.emergency_ticks
        row["relaxing_ticks"] = m.relaxing_ticks
        row["clamped_ticks"] = m.clamped_ticks
        row["error"] = ""
    except Exception as exc:  # recorded per seed; the batch carries on
        log.exception("seed %d failed", seed)
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def batch_columns(obstacle_ids) -> list[str]:
    cols = ["seed", "rmse"]
    for oid in obstacle_ids:
        cols += [f"d_min_{oid}", f"h_min_{oid}", f"delta_max_{oid}", f"violation_{oid}"]
    return cols + ["emergency_ticks", "relaxing_ticks", "clamped_ticks", "error"]


def run_batch(cfg, base_dir: Path, n_seeds: int, workers: int) -> list[dict]:
    ids = [o.id for o in cfg.obstacles]
    jobs = [(cfg.raw, str(base_dir), s, ids) for s in range(n_seeds)]
    if workers <= 1 or n_seeds == 1:
        rows = [batch_row(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(batch_row, *zip(*jobs)))
    return sorted(rows, key=lambda r: r["seed"])


def write_batch_csv(path: Path, rows, obstacle_ids) -> None:
    cols = batch_columns(obstacle_ids)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in cols])


def cmd_batch(args) -> int:
    cfg, base = _load(args)
    if args.seeds <= 0:
        raise config_mod.ConfigError("--seeds", "must be positive")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(config_mod.effective_json(cfg))
    workers = args.workers or os.cpu_count() or 1
    rows = run_batch(cfg, base, args.seeds, workers)
    ids = [o.id for o in cfg.obstacles]
    write_batch_csv(out / "batch.csv", rows, ids)
    failed = sum(bool(r["error"]) for r in rows)
    emergencies = sum(int(r.get("emergency_ticks", 0) or 0) > 0 for r in rows)
    print(f"{len(rows)} seeds, {failed} failed, {emergencies} with emergency ticks -> {out / 'batch.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# beta sweep


def _parse_betas(text: str) -> list[float]:
    try:
        betas = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise config_mod.ConfigError("--betas", f"not a comma-separated list of numbers: {text!r}") from None
    if not betas:
        raise config_mod.ConfigError("--betas", "needs at least one value")
    if any(not (b > 0 and math.isfinite(b)) for b in betas):
        raise config_mod.ConfigError("--betas", "values must be finite and > 0")
    return betas


def cmd_sweep_beta(args) -> int:
    betas = _parse_betas(args.betas)
    cfg, base = _load(args)
    seed = cfg.sim.seed if args.seed is None else args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snap = world.snapshot(cfg, seed, cfg.sweep.snapshot_time, base)
    rows = world.sweep_beta(cfg, snap, betas)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "delta_max", "dist_to_strict", "relaxed_status", "strict_status"])
        for r in rows:
            w.writerow([_fmt(r.beta), _fmt(r.delta_max), _fmt(r.dist_to_strict),
                        str(r.relaxed_status), str(r.strict_status)])
    return EXIT_OK


# ---------------------------------------------------------------------------
# coverage


def cmd_coverage(args) -> int:
    if args.samples <= 0:
        raise config_mod.ConfigError("--samples", "must be positive")
    cfg, _ = _load(args)
    seed = cfg.sim.seed if args.seed is None else args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    flagged, n = world.coverage_search(cfg.chain, cfg.coverage, args.samples, seed, cfg.filter.epsilon)
    with open(out / "coverage.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample"] + [f"q{i}" for i in range(cfg.chain.n)]
                   + ["strict_status", "relaxed_status", "hard_rows_ok", "delta"])
        for s in flagged:
            delta = max(s.relaxed_deltas.values(), default=0.0)
            w.writerow([s.index, *map(_fmt, s.q), str(s.strict_status), str(s.relaxed_status),
                        _fmt(s.hard_slack_ok), _fmt(delta)])
    relaxed_ok = sum(s.relaxed_status.value == "Optimal" for s in flagged)
    print(f"{n} samples, {len(flagged)} strict-infeasible, {relaxed_ok} of those relaxed-Optimal")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hcbf", description="Prioritized barrier-function safety filter simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", metavar="PATH", help="scenario JSON (may name a preset)")
        sp.add_argument("--out", metavar="DIR", required=True, help="output directory")
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="override sim.seed")

    sp = sub.add_parser("run", help="single rollout: steps.csv, metrics.json")
    common(sp)
    sp.add_argument("--dump-qp", action="store_true", help="write QP matrices for emergency ticks and the last tick")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("batch", help="seeds 0..N-1: batch.csv")
    common(sp, seed=False)
    sp.add_argument("--seeds", type=int, default=10, metavar="N")
    sp.add_argument("--workers", type=int, default=None, metavar="N", help="default: CPU count")
    sp.set_defaults(func=cmd_batch)

    sp = sub.add_parser("sweep-beta", help="relaxation weight sweep on a snapshot: sweep.csv")
    common(sp)
    sp.add_argument("--betas", default="10,100,1000,10000,100000,1000000", help="comma-separated list")
    sp.set_defaults(func=cmd_sweep_beta)

    sp = sub.add_parser("coverage", help="random search for strict-infeasible states: coverage.csv")
    common(sp)
    sp.add_argument("--samples", type=int, default=10000, metavar="N")
    sp.set_defaults(func=cmd_coverage)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except config_mod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (world.PlacementError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

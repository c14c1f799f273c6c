"""Command-line front end: corpus generation, benchmarks, simulation.

Exit codes are a stable contract: 0 success, 2 usage (bad flags or bad
input files), 3 I/O (unwritable outputs), 4 numerical failure.  Every
report starts with ``# version/# seed/# config_hash`` comment lines so
runs can be traced back to their configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (ALGO_EGP, ALGO_HOLRD, HORIZON_ALGOS, HORIZONS_PCT,
                    WINDOW_ALGOS, WINDOWS_S, bench_horizon, bench_window)
from .errors import (GpIntentError, NumericalError, SceneFormatError,
                     TrajectoryFormatError)
from .scene import SceneConfig, default_scene, load_scene
from .simulator import (METRICS_HEADER, RUN_LOG_HEADER, SimConfig,
                        metrics_row, run, run_log_rows)
from .strategies import (DECISION_LOG_HEADER, StrategyKind, StrategyParams,
                         decision_log_rows)
from .trajgen import (CORPUS_PAIRS, DEFAULT_GAZE_LEAD_S, DEFAULT_NOISE_STD,
                      GenParams, TrajectoryRecord, gen_corpus, read_csv,
                      write_csv)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

GAZE_COLUMNS = "gaze_ox_m,gaze_oy_m,gaze_oz_m,gaze_dx,gaze_dy,gaze_dz"

METRIC_FIELDS = ("T_d_s", "T_r_s", "D_r_m", "SP_d", "SP_r", "D_h_m")


class CliError(Exception):
    """Carries the exit code the failure maps to."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def worker_count(n_jobs: int) -> int:
    """Fan-out width: min(cpu, 4), capped by GPINTENT_THREADS."""
    n = min(os.cpu_count() or 1, 4)
    env = os.environ.get("GPINTENT_THREADS", "").strip()
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise CliError(EXIT_USAGE,
                           f"GPINTENT_THREADS must be an integer, got {env!r}")
        if cap < 1:
            raise CliError(EXIT_USAGE, "GPINTENT_THREADS must be >= 1")
        n = min(n, cap)
    return max(1, min(n, n_jobs))


def _fan_out(fn, jobs):
    """Run jobs across workers; results keep job order, so assembly is
    deterministic regardless of the worker count."""
    n = worker_count(len(jobs))
    if n <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    # first job runs alone so JIT compilation is not raced
    head = fn(jobs[0])
    with ThreadPoolExecutor(max_workers=n) as pool:
        tail = list(pool.map(fn, jobs[1:]))
    return [head] + tail


def config_hash(config: dict) -> str:
    """12-hex digest of the canonical JSON form of a config dict."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _meta_lines(seed: int, cfg_hash: str) -> list[str]:
    return [f"# config_hash={cfg_hash}", f"# seed={seed}",
            f"# version={__version__}"]


def _scene_digest(scene: SceneConfig) -> str:
    return config_hash(scene.to_dict())


def _load_scene(path: Path | None) -> SceneConfig:
    if path is None:
        return default_scene()
    if not path.is_file():
        raise CliError(EXIT_USAGE, f"scene file not found: {path}")
    try:
        return load_scene(path)
    except SceneFormatError as exc:
        raise CliError(EXIT_USAGE, f"bad scene file {path}: {exc}")
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot read scene file {path}: {exc}")


def _read_record(path: Path) -> TrajectoryRecord:
    if not path.is_file():
        raise CliError(EXIT_USAGE, f"trajectory file not found: {path}")
    try:
        return read_csv(path)
    except TrajectoryFormatError as exc:
        raise CliError(EXIT_USAGE, f"bad trajectory file {path}: {exc}")
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot read trajectory {path}: {exc}")


def _read_corpus(corpus_dir: Path) -> list[tuple[Path, TrajectoryRecord]]:
    """Records in manifest order when a manifest exists, else sorted by
    file name."""
    if not corpus_dir.is_dir():
        raise CliError(EXIT_USAGE, f"corpus directory not found: {corpus_dir}")
    manifest = corpus_dir / "manifest.json"
    paths: list[Path] = []
    if manifest.is_file():
        try:
            entries = json.loads(manifest.read_text())["records"]
            paths = [corpus_dir / e["file"] for e in entries]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CliError(EXIT_USAGE, f"bad manifest {manifest}: {exc}")
    else:
        paths = sorted(corpus_dir.glob("*.csv"))
    if not paths:
        raise CliError(EXIT_USAGE, f"no trajectory CSVs in {corpus_dir}")
    return [(p, _read_record(p)) for p in paths]


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}")


def _parse_floats(spec: str, what: str) -> list[float]:
    try:
        vals = [float(tok) for tok in spec.split(",") if tok.strip()]
    except ValueError:
        raise CliError(EXIT_USAGE, f"bad {what} list: {spec!r}")
    if not vals:
        raise CliError(EXIT_USAGE, f"empty {what} list")
    return vals


def _parse_params(spec: str | None) -> StrategyParams:
    """key=value[,key=value...] overrides for StrategyParams."""
    if not spec:
        return StrategyParams()
    kwargs: dict = {}
    valid = {"r", "alpha", "window_s", "horizon_fraction", "safe_nn_to_point"}
    for tok in spec.split(","):
        tok = tok.strip()
        if not tok:
            continue
        key, sep, val = tok.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in valid:
            raise CliError(EXIT_USAGE,
                           f"bad --params entry {tok!r}; keys: "
                           + ", ".join(sorted(valid)))
        try:
            if key == "safe_nn_to_point":
                kwargs[key] = val.strip().lower() in ("1", "true", "yes")
            else:
                kwargs[key] = float(val)
        except ValueError:
            raise CliError(EXIT_USAGE, f"bad --params value in {tok!r}")
    try:
        return StrategyParams(**kwargs)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, f"bad --params: {exc}")


def _parse_strategies(spec: str) -> list[StrategyKind]:
    names = [tok.strip().upper() for tok in spec.split(",") if tok.strip()]
    if not names:
        raise CliError(EXIT_USAGE, "empty strategy list")
    kinds = []
    for name in names:
        try:
            kinds.append(StrategyKind(name))
        except ValueError:
            raise CliError(EXIT_USAGE,
                           f"unknown strategy {name!r}; choose from "
                           + ", ".join(k.value for k in StrategyKind))
    return kinds


def _require_gaze(kind: StrategyKind, rec: TrajectoryRecord,
                  path: Path) -> None:
    if kind.uses_gaze and not rec.has_gaze:
        raise CliError(EXIT_USAGE,
                       f"strategy {kind.value} needs gaze columns "
                       f"({GAZE_COLUMNS}) but {path} does not provide them")


def _fmt_cell(v: float) -> str:
    return "" if np.isnan(v) else f"{v:.9g}"


# ---------------------------------------------------------------- commands

def cmd_gen(args) -> int:
    scene = _load_scene(args.scene)
    try:
        gp = GenParams(noise_std=args.noise_std, gaze_lead_s=args.gaze_lead,
                       seed=args.seed)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc))
    records = gen_corpus(scene, CORPUS_PAIRS, gp)
    cfg_hash = config_hash({
        "command": "gen", "seed": args.seed, "scene": _scene_digest(scene),
        "noise_std": gp.noise_std, "gaze_lead_s": gp.gaze_lead_s,
        "pairs": [list(p) for p in CORPUS_PAIRS]})
    out = args.out_dir
    entries = []
    for rec in records:
        name = f"traj_{rec.start_id:02d}_{rec.end_id:02d}.csv"
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_csv(rec, out / name)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot write {out / name}: {exc}")
        entries.append({"file": name, "start_id": rec.start_id,
                        "end_id": rec.end_id, "label": rec.label,
                        "n_samples": len(rec),
                        "motion_start_s": rec.motion_start_s})
    manifest = {"version": __version__, "seed": args.seed,
                "config_hash": cfg_hash, "records": entries}
    _write_text(out / "manifest.json",
                json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    print(f"wrote {len(records)} trajectories + manifest.json to {out}")
    return EXIT_OK


def _emit_report(report, args, cfg: dict) -> int:
    report.meta = {"config_hash": config_hash(cfg), "seed": args.seed,
                   "version": __version__}
    text = report.to_csv()
    if args.out is None:
        sys.stdout.write(text)
    else:
        _write_text(args.out, text)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_bench_window(args) -> int:
    algos = [tok.strip() for tok in args.algos.split(",") if tok.strip()]
    for algo in algos:
        if algo not in WINDOW_ALGOS:
            raise CliError(EXIT_USAGE, f"unknown algorithm {algo!r}; choose "
                                       f"from {', '.join(WINDOW_ALGOS)}")
    if not algos:
        raise CliError(EXIT_USAGE, "empty algorithm list")
    windows = _parse_floats(args.windows, "window")
    if any(w <= 0 for w in windows):
        raise CliError(EXIT_USAGE, "windows must be positive seconds")
    if args.reps < 1:
        raise CliError(EXIT_USAGE, "--reps must be >= 1")
    corpus = _read_corpus(args.corpus)
    records = [rec for _, rec in corpus]
    try:
        report = bench_window(records, windows, algos, reps=args.reps)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc))
    return _emit_report(report, args, {
        "command": "bench-window", "seed": args.seed, "algos": algos,
        "windows": windows, "reps": args.reps,
        "corpus": [p.name for p, _ in corpus]})


def cmd_bench_horizon(args) -> int:
    algos = [tok.strip() for tok in args.algos.split(",") if tok.strip()]
    for algo in algos:
        if algo not in HORIZON_ALGOS:
            raise CliError(EXIT_USAGE, f"unknown algorithm {algo!r}; choose "
                                       f"from {', '.join(HORIZON_ALGOS)}")
    if not algos:
        raise CliError(EXIT_USAGE, "empty algorithm list")
    horizons = _parse_floats(args.horizons, "horizon")
    for pct in horizons:
        if not 0 < pct <= 50:
            raise CliError(EXIT_USAGE,
                           f"horizon {pct}% outside (0, 50] of the window")
    if args.window <= 0:
        raise CliError(EXIT_USAGE, "--window must be positive seconds")
    corpus = _read_corpus(args.corpus)
    records = [rec for _, rec in corpus]
    try:
        report = bench_horizon(records, horizons, window_s=args.window,
                               algos=algos, stride=args.stride)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc))
    return _emit_report(report, args, {
        "command": "bench-horizon", "seed": args.seed, "algos": algos,
        "horizons": horizons, "window_s": args.window, "stride": args.stride,
        "corpus": [p.name for p, _ in corpus]})


def _sim_config(scene: SceneConfig, params: StrategyParams,
                args) -> SimConfig:
    return SimConfig(scene=scene, params=params,
                     first_detection=args.first_detection)


def cmd_simulate(args) -> int:
    scene = _load_scene(args.scene)
    params = _parse_params(args.params)
    try:
        kind = StrategyKind(args.strategy.upper())
    except ValueError:
        raise CliError(EXIT_USAGE, f"unknown strategy {args.strategy!r}")
    rec = _read_record(args.trajectory)
    _require_gaze(kind, rec, args.trajectory)
    cfg = _sim_config(scene, params, args)
    try:
        metrics, log = run(rec, kind, cfg)
    except GpIntentError as exc:
        raise CliError(EXIT_NUMERICAL if isinstance(exc, NumericalError)
                       else EXIT_USAGE, str(exc))
    traj_id = f"{rec.start_id}-{rec.end_id}"
    cfg_hash = config_hash({
        "command": "simulate", "seed": args.seed, "strategy": kind.value,
        "scene": _scene_digest(scene), "trajectory": args.trajectory.name,
        "params": dataclasses.asdict(params),
        "first_detection": args.first_detection})
    meta = _meta_lines(args.seed, cfg_hash)
    metrics_text = "\n".join(meta + [METRICS_HEADER,
                                     metrics_row(traj_id, kind, metrics)])
    metrics_text += "\n"
    if args.out_metrics is None:
        sys.stdout.write(metrics_text)
    else:
        _write_text(args.out_metrics, metrics_text)
    if args.out_log is not None:
        _write_text(args.out_log,
                    "\n".join(meta + [RUN_LOG_HEADER]
                              + run_log_rows(log)) + "\n")
    if args.out_decisions is not None:
        _write_text(args.out_decisions,
                    "\n".join(meta + [DECISION_LOG_HEADER]
                              + decision_log_rows(log.decision_records,
                                                  kind)) + "\n")
    return EXIT_OK


def cmd_compare(args) -> int:
    scene = _load_scene(args.scene)
    params = _parse_params(args.params)
    kinds = _parse_strategies(args.strategies)
    corpus = _read_corpus(args.corpus)
    for kind in kinds:
        for path, rec in corpus:
            _require_gaze(kind, rec, path)
    cfg = _sim_config(scene, params, args)
    jobs = [(kind, path, rec) for kind in kinds for path, rec in corpus]

    def one(job):
        kind, path, rec = job
        try:
            metrics, _ = run(rec, kind, cfg)
        except NumericalError as exc:
            raise CliError(EXIT_NUMERICAL,
                           f"{kind.value} on {path.name}: {exc}")
        return f"{rec.start_id}-{rec.end_id}", kind, metrics

    results = _fan_out(one, jobs)
    cfg_hash = config_hash({
        "command": "compare", "seed": args.seed,
        "strategies": [k.value for k in kinds],
        "scene": _scene_digest(scene),
        "params": dataclasses.asdict(params),
        "first_detection": args.first_detection,
        "corpus": [p.name for p, _ in corpus]})
    meta = _meta_lines(args.seed, cfg_hash)
    out = args.out_dir

    runs_lines = meta + [METRICS_HEADER]
    runs_lines += [metrics_row(tid, kind, m) for tid, kind, m in results]
    _write_text(out / "runs.csv", "\n".join(runs_lines) + "\n")

    by_kind = {kind: [m for _, k, m in results if k is kind]
               for kind in kinds}
    summary_lines = meta + ["strategy,metric,mean,sd,n"]
    for kind in kinds:
        for field in METRIC_FIELDS:
            vals = np.array([getattr(m, field.lower()) for m in by_kind[kind]],
                            dtype=float)
            ok = vals[~np.isnan(vals)]
            mean = float(np.mean(ok)) if ok.size else float("nan")
            sd = float(np.std(ok, ddof=1)) if ok.size > 1 else float("nan")
            summary_lines.append(
                f"{kind.value},{field},{_fmt_cell(mean)},{_fmt_cell(sd)},"
                f"{ok.size}")
    _write_text(out / "summary.csv", "\n".join(summary_lines) + "\n")

    traj_ids = []
    for tid, _, _ in results:
        if tid not in traj_ids:
            traj_ids.append(tid)
    for field in METRIC_FIELDS:
        lines = meta + ["trajectory_id," + ",".join(k.value for k in kinds)]
        for tid in traj_ids:
            row = [tid]
            for kind in kinds:
                cell = next((m for t, k, m in results
                             if t == tid and k is kind), None)
                row.append("" if cell is None
                           else _fmt_cell(getattr(cell, field.lower())))
            lines.append(",".join(row))
        _write_text(out / f"plot_{field}.csv", "\n".join(lines) + "\n")

    print(f"wrote runs.csv, summary.csv and {len(METRIC_FIELDS)} plot CSVs "
          f"to {out}")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gpintent",
        description="Online GP hand-trajectory prediction benchmarks and "
                    "intention-aware robot simulation.")
    p.add_argument("--version", action="version",
                   version=f"gpintent {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scene", type=Path, default=None,
                        help="scene JSON file (default: built-in layout)")
        sp.add_argument("--seed", type=int, default=42,
                        help="seed recorded in report headers (default 42)")

    g = sub.add_parser(
        "gen", help="write the 7-record synthetic corpus",
        description="Generate the synthetic reach corpus (7 records) plus "
                    "manifest.json.  Trajectory CSV columns: t_s, hand_x_m, "
                    "hand_y_m, hand_z_m, hand_vx_mps, hand_vy_mps, "
                    "hand_vz_mps, gaze_ox_m, gaze_oy_m, gaze_oz_m, gaze_dx, "
                    "gaze_dy, gaze_dz.")
    common(g)
    g.add_argument("--out-dir", type=Path, default=Path("corpus"))
    g.add_argument("--noise-std", type=float, default=DEFAULT_NOISE_STD)
    g.add_argument("--gaze-lead", type=float, default=DEFAULT_GAZE_LEAD_S,
                   help="seconds the gaze leads the hand motion")
    g.set_defaults(func=cmd_gen)

    bw = sub.add_parser(
        "bench-window", help="cycle-time and likelihood vs window length",
        description="Benchmark training windows.  Output columns: window_s, "
                    "algo, time_ms, log_likelihood, mape_pct, rmse_m, reps.")
    common(bw)
    bw.add_argument("--corpus", type=Path, required=True)
    bw.add_argument("--algos", default=",".join(WINDOW_ALGOS))
    bw.add_argument("--windows", default=",".join(str(w) for w in WINDOWS_S))
    bw.add_argument("--reps", type=int, default=5)
    bw.add_argument("--out", type=Path, default=None,
                    help="report path (default: stdout)")
    bw.set_defaults(func=cmd_bench_window)

    bh = sub.add_parser(
        "bench-horizon", help="prediction error vs horizon",
        description="Benchmark prediction horizons.  Output columns: "
                    "horizon_pct, algo, time_ms, log_likelihood, mape_pct, "
                    "rmse_m, reps.")
    common(bh)
    bh.add_argument("--corpus", type=Path, required=True)
    bh.add_argument("--algos", default=",".join(HORIZON_ALGOS))
    bh.add_argument("--horizons",
                    default=",".join(str(h) for h in HORIZONS_PCT),
                    help="percent of the window, each in (0, 50]")
    bh.add_argument("--window", type=float, default=2.0)
    bh.add_argument("--stride", type=int, default=1,
                    help="slide step between evaluated windows")
    bh.add_argument("--out", type=Path, default=None,
                    help="report path (default: stdout)")
    bh.set_defaults(func=cmd_bench_horizon)

    sim = sub.add_parser(
        "simulate", help="replay one trajectory under one strategy",
        description="Run one strategy on one trajectory.  Metrics columns: "
                    f"{METRICS_HEADER}.  Log columns: {RUN_LOG_HEADER}.  "
                    f"Decision columns: {DECISION_LOG_HEADER}.")
    common(sim)
    sim.add_argument("--strategy", required=True,
                     help="one of " + ", ".join(k.value for k in StrategyKind))
    sim.add_argument("--trajectory", type=Path, required=True)
    sim.add_argument("--params", default=None,
                     help="key=value[,key=value...]; keys r, alpha, window_s,"
                          " horizon_fraction, safe_nn_to_point")
    sim.add_argument("--first-detection", action="store_true",
                     help="report the first correct decision instead of the "
                          "first stable one")
    sim.add_argument("--out-metrics", type=Path, default=None,
                     help="metrics CSV (default: stdout)")
    sim.add_argument("--out-log", type=Path, default=None)
    sim.add_argument("--out-decisions", type=Path, default=None)
    sim.set_defaults(func=cmd_simulate)

    cmp_ = sub.add_parser(
        "compare", help="run strategies across the corpus and summarize",
        description="Cross product of strategies x corpus records.  Writes "
                    f"runs.csv ({METRICS_HEADER}), summary.csv (strategy, "
                    "metric, mean, sd, n) and one plot_<metric>.csv per "
                    "metric (trajectory_id plus one column per strategy).")
    common(cmp_)
    cmp_.add_argument("--corpus", type=Path, required=True)
    cmp_.add_argument("--strategies",
                      default=",".join(k.value for k in StrategyKind))
    cmp_.add_argument("--params", default=None,
                      help="key=value[,key=value...] strategy parameters")
    cmp_.add_argument("--first-detection", action="store_true")
    cmp_.add_argument("--out-dir", type=Path, default=Path("compare_out"))
    cmp_.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"gpintent: error: {exc}", file=sys.stderr)
        return exc.code
    except NumericalError as exc:
        print(f"gpintent: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (TrajectoryFormatError, SceneFormatError) as exc:
        print(f"gpintent: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"gpintent: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

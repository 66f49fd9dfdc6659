"""Command-line driver.

Subcommands: ``train`` (offline basis construction), ``run`` (reduced
solves at a parameter with error/bound/speedup reporting), ``verify``
(oracle suites), ``bench`` (the desk-scale speedup experiment).  Exit
status: 0 success, 1 usage error, 2 verification/threshold failure,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, report, verify
from .config import ConfigError, RunConfig, config_summary, load_config, parse_param_list
from .persist import write_matrix
from .pipeline import RunResult, load_basis, run_at_param, run_series, save_bases, train
from .problems import PARAM_NAMES

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class VerificationFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we own the codes
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="strom", description=__doc__)
    parser.add_argument("--version", action="version", version=f"strom {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="run configuration file")
        p.add_argument("--out", type=Path, default=Path("strom-out"), help="output root")
        p.add_argument("--seed", type=int, help="override the config seed")

    p_train = sub.add_parser("train", help="offline phase: FOM sweeps and basis build")
    common(p_train)
    p_train.add_argument("--workers", type=int, default=1, help="concurrent FOM marches")

    p_run = sub.add_parser("run", help="online phase: reduced solves at a parameter")
    common(p_run)
    p_run.add_argument("--param", help="comma-separated parameter components")

    p_verify = sub.add_parser("verify", help="run the oracle suites")
    common(p_verify)

    p_bench = sub.add_parser("bench", help="desk-scale speedup experiment")
    common(p_bench)
    p_bench.add_argument("--workers", type=int, default=1)
    return parser


def _load_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.config is None:
        cfg.validate()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _resolve(root: Path, configured: str) -> Path:
    p = Path(configured)
    return p if p.is_absolute() else root / p


def cmd_train(args) -> int:
    cfg = _load_config(args)
    result = train(cfg, workers=args.workers, keep_states=cfg.train_save_snapshots)
    bases_dir = _resolve(args.out, cfg.paths_bases)
    written = save_bases(result, bases_dir)
    if cfg.train_save_snapshots:
        snap_dir = _resolve(args.out, cfg.paths_snapshots)
        snap_dir.mkdir(parents=True, exist_ok=True)
        for p, states in enumerate(result.sample_states):
            write_matrix(snap_dir / f"states_{p:03d}.strommat", states)

    reports_dir = _resolve(args.out, cfg.paths_reports)
    reports_dir.mkdir(parents=True, exist_ok=True)
    pairs = config_summary(cfg)
    pairs += [
        ("train.workers", args.workers),
        ("train.final_rank", result.state.rank),
        ("train.columns_ingested", result.state.k),
        ("train.rejected_columns", result.state.n_rejected),
        ("train.dependent_columns", result.state.n_dependent),
        ("train.truncation_events", result.state.n_truncated),
        ("train.cap_restarts", result.state.n_restarts),
        ("train.bases_written", ", ".join(written)),
    ]
    for p, wall in enumerate(result.fom_wall_times):
        pairs.append((f"train.fom_wall_s.sample{p}", wall))
    series = {
        "column": np.arange(1, result.rank_history.size + 1, dtype=float),
        "rank": result.rank_history.astype(float),
    }
    report.write_report(reports_dir / "train_report.txt", pairs, series)
    report.render_training_figures(reports_dir, result.state.sigma, result.rank_history)
    print(f"trained basis: rank {result.state.rank}, n_s={cfg.rom_ns}, n_t={cfg.rom_nt}")
    print(f"artifacts in {bases_dir} and {reports_dir}")
    return EXIT_OK


def _report_run(cfg: RunConfig, res: RunResult, reports_dir: Path, prefix: str) -> None:
    reports_dir.mkdir(parents=True, exist_ok=True)
    pairs = config_summary(cfg)
    pairs += [
        ("run.param", ",".join(f"{v:g}" for v in res.param.values())),
        ("run.ns", res.n_s),
        ("run.nt", res.n_t),
        ("run.workers", 1),
        ("srom.march_wall_s", res.srom_wall),
        ("srom.march_cpu_s", res.srom_cpu),
        ("strom.online_wall_s", res.strom_wall),
        ("strom.online_cpu_s", res.strom_cpu),
    ]
    if res.fom_wall is not None:
        pairs += [
            ("fom.wall_s", res.fom_wall),
            ("fom.cpu_s", res.fom_cpu),
            ("speedup.srom.wall", res.speedup_srom_wall),
            ("speedup.strom.wall", res.speedup_strom_wall),
            ("speedup.strom.cpu", res.speedup_strom_cpu),
            ("error.srom.max_rel", float(np.max(res.rel_error_srom))),
            ("error.strom.max_rel", float(np.max(res.rel_error_strom))),
        ]
    for name, rep in res.bound_reports.items():
        pairs.append((f"bound.{name}.valid", rep.valid))
        pairs.append((f"bound.{name}.max_value", float(np.max(rep.step_bounds))))
        if rep.st_bound is not None:
            pairs.append((f"bound.{name}.scalar", rep.st_bound))
    for i, note in enumerate(res.notes):
        pairs.append((f"note.{i}", note))

    series = run_series(res)
    report.write_report(reports_dir / f"{prefix}_report.txt", pairs, series)
    report.write_series_csv(reports_dir / f"{prefix}_series.csv", series)
    report.render_error_figure(
        reports_dir / f"{prefix}_errors.png",
        series,
        f"{cfg.problem_kind} at {res.param}",
    )
    outputs = {
        "fom": res.fom_outputs,
        "srom": res.srom_outputs,
        "strom": res.strom_outputs,
    }
    report.render_output_figure(
        reports_dir / f"{prefix}_outputs.png",
        res.grid.times,
        outputs,
        f"{cfg.problem_kind} output at {res.param}",
    )


def cmd_run(args) -> int:
    cfg = _load_config(args)
    if args.param:
        points = parse_param_list(args.param)
        if len(points) != 1:
            raise UsageError("--param expects exactly one parameter point")
        components = points[0]
    elif cfg.test_params:
        components = cfg.test_params[0]
    else:
        raise UsageError("no parameter: pass --param or set test_params in the config")
    param = cfg.param_point(components)

    basis = load_basis(_resolve(args.out, cfg.paths_bases), cfg.rom_ns, cfg.rom_nt)
    res = run_at_param(cfg, param, basis, seed=cfg.seed)
    reports_dir = _resolve(args.out, cfg.paths_reports)
    _report_run(cfg, res, reports_dir, "run")

    print(f"param {param}: n_s={res.n_s}, n_t={res.n_t}")
    if res.fom_wall is not None:
        print(
            f"fom {res.fom_wall:.4f}s | srom {res.srom_wall:.5f}s "
            f"({res.speedup_srom_wall:.1f}x) | strom online {res.strom_wall:.6f}s "
            f"({res.speedup_strom_wall:.1f}x wall, {res.speedup_strom_cpu:.1f}x cpu)"
        )
        print(
            f"max relative error: srom {np.max(res.rel_error_srom):.3e}, "
            f"strom {np.max(res.rel_error_strom):.3e}"
        )
    for name, rep in res.bound_reports.items():
        print(f"bound {name}: valid={rep.valid}")
    for note in res.notes:
        print(f"note: {note}")
    print(f"report in {reports_dir}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    results = verify.run_all(seed=cfg.seed)
    for r in results:
        print(r.line())
    if not all(r.passed for r in results):
        raise VerificationFailure(
            ", ".join(r.name for r in results if not r.passed)
        )
    return EXIT_OK


BENCH_SPEEDUP_FLOOR = 100.0
BENCH_ERROR_CEIL = 0.05


def bench_config() -> RunConfig:
    """The pinned desk-scale experiment: 100x100 grid, 200 steps, 3 samples."""
    cfg = RunConfig(
        problem_kind="advdiff2d",
        problem_nx=100,
        problem_ny=100,
        problem_vx=1.0,
        problem_vy=0.5,
        time_dt=0.005,
        time_nt=200,
        samples=[[0.5], [1.0], [2.0]],
        test_params=[[1.3]],
        rom_ns=10,
        rom_nt=3,
        svd_tol=1e-7,
        svd_sv_tol=1e-12,
        svd_max_rank=80,
        svd_cap_mode="truncate",
        ref_mode="zero",
    )
    cfg.validate()
    return cfg


def cmd_bench(args) -> int:
    cfg = load_config(args.config) if args.config else bench_config()
    if args.seed is not None:
        cfg.seed = args.seed
    start = time.perf_counter()
    result = train(cfg, workers=args.workers)
    train_time = time.perf_counter() - start

    param = cfg.param_point(cfg.test_params[0])
    res = run_at_param(cfg, param, result.basis, with_bounds=False, seed=cfg.seed)
    total = time.perf_counter() - start

    speedup = res.speedup_strom_wall
    max_err = float(np.max(res.rel_error_strom))
    passed = speedup >= BENCH_SPEEDUP_FLOOR and max_err <= BENCH_ERROR_CEIL

    reports_dir = _resolve(args.out, cfg.paths_reports)
    _report_run(cfg, res, reports_dir, "bench")
    extra = [
        ("bench.train_wall_s", train_time),
        ("bench.total_wall_s", total),
        ("bench.workers", args.workers),
        ("bench.speedup_floor", BENCH_SPEEDUP_FLOOR),
        ("bench.speedup_wall", speedup),
        ("bench.speedup_cpu", res.speedup_strom_cpu),
        ("bench.error_ceiling", BENCH_ERROR_CEIL),
        ("bench.max_rel_error", max_err),
        ("bench.final_rank", result.state.rank),
        ("bench.pass", passed),
    ]
    report.write_report(reports_dir / "bench_summary.txt", extra)

    print(
        f"bench: N_s={cfg.problem_nx * cfg.problem_ny}, N_t={cfg.time_nt}, "
        f"n_s*n_t={cfg.rom_ns * cfg.rom_nt}"
    )
    print(f"fom wall {res.fom_wall:.3f}s, strom online {res.strom_wall * 1e3:.3f}ms")
    print(
        f"speedup {speedup:.1f}x wall / {res.speedup_strom_cpu:.1f}x cpu "
        f"(floor {BENCH_SPEEDUP_FLOOR:.0f}x), max rel error {max_err:.4%} "
        f"(ceiling {BENCH_ERROR_CEIL:.0%})"
    )
    print(f"total experiment time {total:.1f}s; report in {reports_dir}")
    if not passed:
        raise VerificationFailure(
            f"bench thresholds not met: speedup {speedup:.1f}x, error {max_err:.4%}"
        )
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "train":
            return cmd_train(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "bench":
            return cmd_bench(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationFailure as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failures map to exit code 3
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

"""Command line entry point: ``lyzflow run | verify | sweep | plot``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import io
from .config import RunConfig, build, load_config
from .errors import ConfigError, LyzError
from .integrator import Termination, run

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ABORT = 0, 1, 2, 3
SWEEP_HEADER = ["kappa", "termination", "convergence_time", "t_final", "tau_min", "tau_max",
                "Q", "steps", "output_dir"]

log = logging.getLogger("lyzflow")


def execute(cfg: RunConfig, resume_from: str | None = None) -> tuple[int, dict]:
    """Run one configured simulation and write its output directory."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    system, state = build(cfg)
    control = None
    if resume_from:
        state, control = io.restore_state(resume_from, system, state)
    writer = io.SeriesWriter(out / "series.csv", append=bool(resume_from))
    count = 0

    def on_sample(s, row, ctl):
        nonlocal count
        count += 1
        if resume_from and count == 1:
            return  # already recorded by the run that wrote the snapshot
        writer.write(row)
        if cfg.snapshot_every and count % cfg.snapshot_every == 0:
            io.write_snapshot(out / io.snapshot_name(s.t), s, system, ctl)

    try:
        with writer:
            result = run(system, state, cfg.stepper(), on_sample=on_sample, resume=control)
    except LyzError as exc:
        log.error("run aborted: %s", exc)
        summary = {"termination": "Aborted", "message": f"{type(exc).__name__}: {exc}"}
        io.write_summary(out / "summary.json", summary)
        return EXIT_ABORT, summary
    io.write_snapshot(out / io.snapshot_name(result.final_state.t), result.final_state, system)
    summary = io.summary_dict(result, cfg.formulation)
    summary["config"] = {"preset": cfg.preset, "formulation": cfg.formulation,
                         "n_complex": cfg.n_complex, "N": cfg.N, "lambda": cfg.lam,
                         "kappa": cfg.kappa, "scheme": cfg.scheme, "seed": cfg.seed}
    io.write_summary(out / "summary.json", summary)
    failed = result.termination in (Termination.METRIC_DEGENERATE, Termination.NON_FINITE)
    return (EXIT_ABORT if failed else EXIT_OK), summary


def _load(path: str, output: str | None) -> RunConfig:
    cfg = load_config(path)
    if output:
        cfg = replace(cfg, output_dir=output)
    return cfg


def cmd_run(args) -> int:
    try:
        cfg = _load(args.config, args.output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code, summary = execute(cfg, args.resume)
    print(f"{summary['termination']}: {cfg.output_dir}")
    return code


def cmd_verify(args) -> int:
    from .verify import CHECKS, run_checks

    known = [c.name for c in CHECKS]
    unknown = [n for n in (args.only or []) if n not in known]
    if unknown:
        print(f"unknown check(s): {', '.join(unknown)}; known: {', '.join(known)}", file=sys.stderr)
        return EXIT_USAGE
    outcomes = run_checks(args.only)
    width = max(len(o.name) for o in outcomes)
    for o in outcomes:
        status = "PASS" if o.passed else "FAIL"
        print(f"{status}  {o.name:<{width}}  {o.seconds:6.1f}s  {o.detail}")
    failed = [o.name for o in outcomes if not o.passed]
    if failed:
        print(f"failed: {', '.join(failed)}")
        return EXIT_FAIL
    print(f"all {len(outcomes)} checks passed")
    return EXIT_OK


def parse_kappas(text: str) -> list[float]:
    values = [v for v in text.replace(",", " ").split() if v]
    return [float(v) for v in values]


def _sweep_child(cfg: RunConfig) -> dict:
    code, summary = execute(cfg)
    final = summary.get("final", {})
    converged = summary["termination"] == Termination.CONVERGED.value
    return {
        "kappa": cfg.kappa,
        "termination": summary["termination"],
        "convergence_time": summary["t_final"] if converged else math.nan,
        "t_final": summary.get("t_final", math.nan),
        "tau_min": final.get("tau_min"),
        "tau_max": final.get("tau_max"),
        "Q": final.get("Q"),
        "steps": summary.get("steps", 0),
        "output_dir": cfg.output_dir,
        "exit": code,
    }


def sweep_workers(count: int) -> int:
    cap = os.environ.get("LYZ_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(count, limit))


def cmd_sweep(args) -> int:
    try:
        kappas = parse_kappas(args.kappa)
        base = _load(args.config, args.output)
        configs = [replace(base, kappa=k, output_dir=str(Path(base.output_dir) / f"kappa_{k:g}"))
                   for k in kappas]
        for c in configs:
            c.validate()
    except (ConfigError, ValueError) as exc:
        print(f"sweep error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not kappas:
        print("sweep error: empty kappa list", file=sys.stderr)
        return EXIT_USAGE
    workers = sweep_workers(len(configs))
    if workers == 1:
        rows = [_sweep_child(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_child, configs))
    out = Path(base.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow([r[k] if isinstance(r[k], str) else
                        io.format_value(math.nan if r[k] is None else r[k]) for k in SWEEP_HEADER])
    for r in rows:
        print(f"kappa = {r['kappa']:g}: {r['termination']} at t = {r['t_final']:.4g}")
    return EXIT_ABORT if any(r["exit"] != EXIT_OK for r in rows) else EXIT_OK


def cmd_plot(args) -> int:
    try:
        data = io.read_series(args.csv)
    except (OSError, ValueError, StopIteration) as exc:
        print(f"cannot read {args.csv}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    columns = [c for c in args.columns.replace(",", " ").split() if c]
    unknown = [c for c in columns if c not in data]
    if unknown or not columns:
        print(f"unknown column(s): {', '.join(unknown) or '(none given)'}", file=sys.stderr)
        return EXIT_USAGE
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(args.out) if args.out else Path(args.csv).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in columns:
        fig, ax = plt.subplots(figsize=(6, 4))
        y = data[name]
        if args.log:
            y = abs(y)
            ax.set_yscale("log")
        ax.plot(data["t"], y, lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel(f"|{name}|" if args.log else name)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"{Path(args.csv).stem}_{name}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lyzflow", description="coupled Kahler-flow simulator on flat tori")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configured simulation")
    p.add_argument("config")
    p.add_argument("--output", help="override output_dir")
    p.add_argument("--resume", metavar="SNAPSHOT", help="continue from a snapshot file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run the invariant checks")
    p.add_argument("--only", action="append", metavar="NAME", help="run only the named check(s)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run one simulation per kappa in parallel")
    p.add_argument("config")
    p.add_argument("--kappa", required=True, help="comma or space separated list")
    p.add_argument("--output", help="override output_dir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="SVG line charts of series.csv columns")
    p.add_argument("csv")
    p.add_argument("--columns", required=True)
    p.add_argument("--log", action="store_true")
    p.add_argument("--out", help="output directory (default: next to the csv)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""
Command line interface.

``xiga run <config.json> [--out DIR]``
    Solve one configured problem and write the field (VTK), segments (VTK),
    an error report (JSON, when a reference is configured) and a log.
``xiga study <id> [--p ...] [--h ...] [--gamma-g ...] [--out DIR]``
    Run a benchmark study and write its CSV table and rates summary.

``XIGA_NUM_THREADS`` sets the number of worker processes used for studies.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

log = logging.getLogger("xiga")


def _setup_logging(logfile: Path | None, verbose: bool):
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if logfile is not None:
        handlers.append(logging.FileHandler(logfile, mode="w"))
    fmt = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
    for h in handlers:
        h.setFormatter(fmt)
    root = logging.getLogger("xiga")
    root.handlers[:] = handlers
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    handlers[0].setLevel(logging.DEBUG if verbose else logging.WARNING)


def cmd_run(args) -> int:
    from .config import RunConfig
    from .errors import ConfigurationError, SolverError
    from .io import write_json, write_segments_vtk, write_solution_vtk

    try:
        cfg = RunConfig.from_file(args.config)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.output.get("dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    _setup_logging(out / f"{cfg.name}.log", args.verbose)
    t0 = time.perf_counter()
    try:
        problem = cfg.build()
        log.info("mesh: %d active elements, level %d", len(problem.mesh.active_elements()), cfg.level)
        log.info("dofs: %d", problem.dofmap.n_dofs)
        with_cond = bool(cfg.output.get("condition", False))
        sol = problem.solve(with_condition=with_cond)
    except ConfigurationError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        log.error("solver failure: %s", exc)
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    log.info("solved in %.2fs, residual %.3e", time.perf_counter() - t0, sol.report.residual)
    name = "temperature" if cfg.physics == "heat" else "displacement"
    if cfg.output.get("vtk", True):
        write_solution_vtk(out / f"{cfg.name}.vtk", sol, name)
        write_segments_vtk(out / f"{cfg.name}_segments.vtk", problem.mesh)
    if cfg.output.get("histogram", False):
        problem.dofmap.write_histogram(out / f"{cfg.name}_levels.csv")
    if cfg.output.get("matrix", False):
        sol.system.write_matrix_market(out / f"{cfg.name}_matrix.mtx")
    report = {"name": cfg.name, "p": cfg.degree, "cells": list(cfg.cells), "level": cfg.level,
              "dofs": problem.dofmap.n_dofs, "residual": sol.report.residual,
              "cond": sol.report.condition}
    ref = cfg.reference_function()
    if ref is not None:
        l2, h1 = sol.errors(ref)
        report.update(l2=l2, h1=h1)
        log.info("relative L2 %.3e, H1 %.3e", l2, h1)
        print(f"{cfg.name}: L2 = {l2:.3e}  H1 = {h1:.3e}  dofs = {problem.dofmap.n_dofs}")
    write_json(out / f"{cfg.name}_report.json", report)
    return EXIT_OK


def cmd_study(args) -> int:
    from .benchmarks import STUDIES, rate_rows, run_study
    from .errors import ConfigurationError, SolverError
    from .io import write_csv

    if args.id not in STUDIES:
        print(f"error: unknown study {args.id!r}; valid ids: {', '.join(STUDIES)}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _setup_logging(out / f"{args.id}.log", args.verbose)
    overrides = dict(p=args.p, h=args.h, gamma_g=args.gamma_g, h_int=args.h_int,
                     angle=args.angle, delta=args.delta, config=args.config,
                     preset=args.preset, load=args.load)
    if args.condition is not None:
        overrides["condition"] = args.condition
    try:
        reports = run_study(args.id, **overrides)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    table = write_csv(out / f"{args.id}.csv", [r.row() for r in reports])
    summary = rate_rows(args.id, reports)
    print(f"{len(reports)} rows -> {table}")
    if summary:
        write_csv(out / f"{args.id}_rates.csv", summary)
        for row in summary:
            head = " ".join(f"{k}={v}" for k, v in row.items() if not k.endswith("_rate"))
            print(f"  {head}: L2 slope {row['L2_rate']:.2f}, H1 slope {row['H1_rate']:.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xiga", description="Immersed multi-material isogeometric solver")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve a configured problem")
    r.add_argument("config", help="JSON configuration file")
    r.add_argument("--out", help="output directory (default: output.dir or .)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("study", help="run a benchmark study")
    s.add_argument("id", help="sliver, rotated-bar, junction, inclusion or multimaterial")
    s.add_argument("--p", type=int, nargs="+")
    s.add_argument("--h", type=float, nargs="+")
    s.add_argument("--gamma-g", type=float, nargs="+")
    s.add_argument("--h-int", type=float, nargs="+")
    s.add_argument("--angle", type=float, nargs="+")
    s.add_argument("--delta", type=float, nargs="+")
    s.add_argument("--config", nargs="+", help="junction configurations")
    s.add_argument("--preset", nargs="+", help="multimaterial presets")
    s.add_argument("--load", nargs="+", help="sliver load cases")
    cond = s.add_mutually_exclusive_group()
    cond.add_argument("--condition", dest="condition", action="store_true", default=None)
    cond.add_argument("--no-condition", dest="condition", action="store_false")
    s.add_argument("--out", default=".", help="output directory")
    s.set_defaults(func=cmd_study)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

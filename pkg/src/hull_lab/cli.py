"""Command line entry point: ``hull-lab run``, ``hull-lab suite``, ``hull-lab remark1``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import ConfigError
from .report import write_json

EXIT_OK, EXIT_VERDICT, EXIT_PARSE, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("hull_lab")


def max_workers() -> int:
    env = os.environ.get("HULL_LAB_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            log.warning("ignoring HULL_LAB_THREADS=%r", env)
    return n


def execute(cfg: ExperimentConfig, out_dir: Path) -> tuple:
    """Run one experiment and write its report; returns (name, exit code, message)."""
    from .runner import run_experiment

    t0 = time.perf_counter()
    try:
        report = run_experiment(cfg, out_dir)
    except Exception as exc:
        return cfg.name, EXIT_INTERNAL, "".join(traceback.format_exception_only(type(exc), exc)).strip()
    # the only non-deterministic part of a report lives under "timing"
    report["timing"] = {"wall_time_s": time.perf_counter() - t0,
                        "finished": datetime.now(timezone.utc).isoformat()}
    write_json(out_dir / "report.json", report)
    failed = [k for k, v in report["verdicts"].items() if not v["passed"]]
    msg = "pass" if not failed else "FAIL: " + ", ".join(failed)
    return cfg.name, EXIT_OK if not failed else EXIT_VERDICT, msg


def _out_for(base: Path, cfg: ExperimentConfig, many: bool) -> Path:
    return base / cfg.name if many else base


def cmd_run(args) -> int:
    cfgs = []
    for path in args.configs:
        try:
            cfgs.append(load_config(path).scaled(args.grid_scale))
        except ConfigError as exc:
            where = f"{path}:{exc.line}:{exc.column}" if exc.line else str(path)
            print(f"{where}: error: {exc}", file=sys.stderr)
            return EXIT_PARSE
        except OSError as exc:
            print(f"{path}: error: {exc}", file=sys.stderr)
            return EXIT_PARSE
    base = Path(args.out_dir)
    many = len(cfgs) > 1
    jobs = [(c, _out_for(base, c, many)) for c in cfgs]
    workers = 1 if args.sequential else min(max_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(execute, *zip(*jobs)))
    else:
        outcomes = [execute(c, o) for c, o in jobs]
    for name, code, msg in outcomes:
        print(f"{name}: {msg}")
    return max(code for _, code, _ in outcomes)


def cmd_remark1(args) -> int:
    cfg = ExperimentConfig(kind="remark1", name="remark1", lam={"values": [0.5, 1.0, 2.0]},
                           params={"samples": 1000})
    name, code, msg = execute(cfg, Path(args.out_dir))
    print(f"{name}: {msg}")
    return code


def cmd_suite(args) -> int:
    from .acceptance import run_suite

    only = (lambda n: n in args.only) if args.only else (lambda n: True)
    results = run_suite(args.tol_scale, only)
    rows = [(str(r.number), r.title, r.expected, r.observed, "PASS" if r.passed else "FAIL",
             f"{r.seconds:.1f}s") for r in results]
    head = ("#", "criterion", "expected", "observed", "result", "time")
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(head)]
    print("  ".join(h.ljust(w) for h, w in zip(head, widths)))
    for row in rows:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    out = Path(args.out_dir)
    write_json(out / "suite.json", {
        "version": __version__,
        "tol_scale": args.tol_scale,
        "criteria": [{k: v for k, v in r.to_dict().items() if k != "seconds"} for r in results],
        "timing": {r.number: r.seconds for r in results},
    })
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERDICT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hull-lab", description=__doc__)
    p.add_argument("--version", action="version", version=f"hull-lab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out-dir", default="results", help="directory for reports")
        sp.add_argument("--sequential", action="store_true", help="run experiments one at a time")

    r = sub.add_parser("run", help="run experiment config files")
    r.add_argument("configs", nargs="+")
    r.add_argument("--grid-scale", type=int, default=1, help="multiply nx and ny")
    common(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("suite", help="run the acceptance battery")
    s.add_argument("--tol-scale", type=float, default=1.0, help="multiply every tolerance")
    s.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    common(s)
    s.set_defaults(func=cmd_suite)

    m = sub.add_parser("remark1", help="the one-dimensional arc counterexample")
    common(m)
    m.set_defaults(func=cmd_remark1)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "grid_scale", 1) < 1:
        print("error: --grid-scale must be a positive integer", file=sys.stderr)
        return EXIT_PARSE
    try:
        return args.func(args)
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

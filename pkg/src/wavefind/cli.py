"""Command line interface.

Subcommands: run (full discovery/inversion case), simulate (forward model
only), gradcheck (adjoint vs finite differences), version. Errors exit
nonzero with a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from . import __version__
from .embedding import gradient_check
from .pipeline import emit_report, load_config, run_case
from .simulator import simulate


def _build_parser():
    parser = argparse.ArgumentParser(prog="wavefind")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a discovery/inversion case from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None, help="output directory (overrides config)")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--noise", type=float, default=None, help="override the noise level")
    run.add_argument("--quiet", action="store_true")

    sim = sub.add_parser("simulate", help="forward simulation only")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)

    gc = sub.add_parser("gradcheck", help="adjoint gradients vs central finite differences")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--instances", type=int, default=20)

    sub.add_parser("version", help="print the package version")
    return parser


def _cmd_run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.noise is not None:
        cfg = replace(cfg, noise_level=args.noise)
    out_dir = args.out or cfg.output_dir
    if out_dir is None:
        raise ValueError("no output directory: pass --out or set output_dir in the config")
    if not args.quiet:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    report = run_case(cfg)
    emit_report(report, out_dir)
    summary = {
        "eps_u": report.eps_u,
        "eps_c": report.eps_c,
        "eta": report.eta_hat,
        "equation": report.final_equation.summary() if report.final_equation else None,
        "loops_completed": len(report.loops),
        "wall_clock_seconds": report.wall_clock,
        "output_dir": out_dir,
    }
    print(json.dumps(summary, indent=2))
    return 1 if report.error else 0


def _cmd_simulate(args):
    cfg = load_config(args.config)
    wave = simulate(cfg.sim_config())
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "wavefield_true.csv")
    with open(path, "w") as fh:
        for row in wave:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    print(json.dumps({"shape": list(wave.shape), "output": path}))
    return 0


def _cmd_gradcheck(args):
    results = gradient_check(n_instances=args.instances, seed=args.seed)
    for r in results:
        status = "ok" if r["ok"] else "FAIL"
        print(
            f"instance {r['instance']:2d}  nx={r['nx']:2d} nt={r['nt']:2d} "
            f"params={r['n_params']:3d}  max_rel_err={r['max_rel_err']:.3e}  {status}"
        )
    n_bad = sum(not r["ok"] for r in results)
    print(f"{len(results) - n_bad}/{len(results)} instances within tolerance")
    return 0 if n_bad == 0 else 1


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "gradcheck":
            return _cmd_gradcheck(args)
        print(__version__)
        return 0
    except Exception as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

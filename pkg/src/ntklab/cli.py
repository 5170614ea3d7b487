"""Command-line entry point.

Subcommands: ``converge`` (method comparison), ``sweep`` (width sweep),
``audit`` (instrumented dynamics run) and ``plot`` (render CSVs to SVG).
All config-file keys are also flags; flags win.

Exit codes: 0 success, 1 configuration error, 2 a run diverged,
3 audit hard-failure (a definitional identity was violated).
"""

from __future__ import annotations

import argparse
import sys

from . import experiments
from .config import ConfigError, ExperimentConfig, read_config
from .data import DataError
from .dynamics import InconsistencyError
from .ntk import LambdaConvention, Method

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_AUDIT = 3


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI-style config file; flags override its keys")
    g = p.add_argument_group("dataset")
    g.add_argument("--csv", dest="csv_path", help="dataset CSV path (default: synthetic)")
    g.add_argument("--label-column", type=int, help="label column index (default: last)")
    g.add_argument("--positive-class", help="label value mapped to +1 (classification mode)")
    g.add_argument("--regression", action="store_true", default=None,
                   help="treat labels as regression targets (standardized)")
    g.add_argument("-n", type=int, help="synthetic sample count")
    g.add_argument("-d", type=int, help="synthetic feature dimension")
    g.add_argument("--data-seed", type=int, help="synthetic dataset seed")
    r = p.add_argument_group("run")
    r.add_argument("--methods", nargs="+", choices=[m.value for m in Method])
    r.add_argument("--widths", nargs="+", type=int)
    r.add_argument("--seeds", nargs="+", type=int)
    r.add_argument("-T", "--iterations", type=int)
    r.add_argument("--stride", type=int)
    r.add_argument("--lambda-convention", choices=[c.value for c in LambdaConvention])
    r.add_argument("--threshold-frac", type=float)
    p.add_argument("-o", "--outdir")


def _build_config(args) -> ExperimentConfig:
    cfg = read_config(args.config) if args.config else ExperimentConfig()
    for attr, key in [
        ("csv_path", "csv_path"), ("label_column", "label_column"),
        ("positive_class", "positive_class"), ("regression", "regression"),
        ("n", "n"), ("d", "d"), ("data_seed", "data_seed"),
        ("widths", "widths"), ("seeds", "seeds"),
        ("iterations", "iterations"), ("stride", "stride"),
        ("threshold_frac", "threshold_frac"), ("outdir", "outdir"),
    ]:
        val = getattr(args, attr, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "methods", None):
        cfg.methods = [Method(v) for v in args.methods]
    if getattr(args, "lambda_convention", None):
        cfg.lambda_convention = LambdaConvention(args.lambda_convention)
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="ntklab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in [
        ("converge", "train each method/seed and compare convergence"),
        ("sweep", "train across widths and tabulate drift metrics"),
        ("audit", "instrumented run verifying the residual dynamics"),
    ]:
        _add_common(sub.add_parser(name, help=desc))
    plot_p = sub.add_parser("plot", help="render CSV outputs to SVG figures")
    plot_p.add_argument("-o", "--outdir", default="runs", help="experiment output directory")

    args = parser.parse_args(argv)

    if args.command == "plot":
        images = experiments.emit_plots(args.outdir)
        if not images:
            print(f"warning: no plottable CSVs found under {args.outdir}", file=sys.stderr)
        for img in images:
            print(img)
        return EXIT_OK

    try:
        cfg = _build_config(args)
        ds = cfg.load_dataset()
    except (ConfigError, DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "converge":
        summary = experiments.run_convergence(cfg, ds)
        for (method, seed), hit in sorted(summary.iters.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
            hit_s = "not reached" if hit is None else str(hit)
            print(f"{method.value} seed={seed}: iters to {cfg.threshold_frac:g}*loss0 = {hit_s}")
        for res in summary.diverged:
            print(f"{res.method.value} seed={res.seed}: DIVERGED ({res.error})", file=sys.stderr)
        return EXIT_DIVERGED if summary.diverged else EXIT_OK

    if args.command == "sweep":
        summary = experiments.run_width_sweep(cfg, ds)
        for (method, width), (dist, ratio) in sorted(
            summary.final_values.items(), key=lambda kv: (kv[0][0].value, kv[0][1])
        ):
            print(f"{method.value} m={width}: final median max_dist={dist:.4f} pattern_ratio={ratio:.4f}")
        for res in summary.diverged:
            print(f"{res.method.value} m={res.width} seed={res.seed}: DIVERGED ({res.error})", file=sys.stderr)
        return EXIT_DIVERGED if summary.diverged else EXIT_OK

    # audit
    try:
        report = experiments.run_dynamics_audit(cfg, ds)
    except InconsistencyError as exc:
        print(f"audit hard-failure: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    env = report.envelope
    print(f"eta={report.hp.eta:.5f} beta={report.hp.beta:.5f} kappa_bar={report.hp.kappa_bar:.3f}")
    print(f"residual envelope: {int(env.ok.sum())}/{env.ok.size} iterations within bound")
    print(f"flip-term bound: pass rate {report.flip_pass_rate:.4f}")
    wd = report.weight_distance
    print(f"weight distance: measured {wd.max_measured:.4f} <= bound {wd.bound:.4f}: {wd.ok}")
    conc = report.concentration
    print(f"init kernel concentration: fro_gap={conc.fro_gap:.4f} all_ok={conc.all_ok}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

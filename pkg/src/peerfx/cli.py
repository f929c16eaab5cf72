"""Command-line entry point: ``peerfx estimate | simulate | montecarlo``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical or
identification failure.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dgp import PHI_VARIANTS, ErrorCoupling, StructuralParams, simulate_dataset
from .errors import ConfigError, DataError, GraphError, IdentificationError, UndefinedStatisticError
from .estimator import ModelSpec, diagnostics, hausman_test, p_values, tsls_fit
from .instruments import InstrumentSpec
from .io import configs_from_dict, fit_lines, fmt17, load_config, load_dataset, write_dataset
from .montecarlo import McAbort, format_table, report_lines, run_design

log = logging.getLogger("peerfx")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _coef_table(fit):
    se = fit.se
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, fit.theta / np.where(se > 0, se, 1.0), np.nan)
    p = p_values(t)
    rows = [f"{'':<8}{'estimate':>12}{'std err':>12}{'t':>10}{'p':>10}"]
    for k, name in enumerate(fit.labels):
        rows.append(f"{name:<8}{fit.theta[k]:>12.4f}{se[k]:>12.4f}{t[k]:>10.4f}{p[k]:>10.4f}")
    return "\n".join(rows)


def cmd_estimate(args):
    ds = load_dataset(args.edges, args.nodes)
    mspec = ModelSpec(args.model)
    ispec = InstrumentSpec(args.mode, args.steps, args.second_moments)
    ispec.check_model(mspec.model)
    fit = tsls_fit(ds, mspec, ispec)
    print(f"TSLS-{ispec.mode}  model={mspec.model}  G={fit.G}  n={fit.n}  K={fit.K}")
    print(f"instruments: {', '.join(fit.instrument_labels)}")
    print(_coef_table(fit))
    lines = [f"fit.model={mspec.model}", f"fit.mode={ispec.mode}", f"fit.steps={ispec.max_step}"]
    lines += fit_lines(fit)
    if args.hausman:
        other = "X" if ispec.mode == "E" else "E"
        fit_o = tsls_fit(ds, mspec, InstrumentSpec(other, args.steps))
        fit_e, fit_x = (fit, fit_o) if ispec.mode == "E" else (fit_o, fit)
        coords = [c for c in ("delta", "gamma") if c in mspec.labels]
        res = hausman_test(fit_e, fit_x, coords, args.hausman_method)
        print()
        print(f"Hausman test (TSLS-X vs TSLS-E on {', '.join(coords)}, {res.method} form)")
        print(f"  statistic = {res.statistic:.4f}  dof = {res.dof}  p-value = {res.pvalue:.4f}")
        lines += [
            f"hausman.method={res.method}",
            f"hausman.coords={','.join(coords)}",
            f"hausman.statistic={fmt17(res.statistic)}",
            f"hausman.dof={res.dof}",
            f"hausman.pvalue={fmt17(res.pvalue)}",
        ]
    if args.diagnostics:
        diag = diagnostics(ds, mspec, ispec)
        print()
        print("Diagnostics")
        for key, value in diag.as_dict().items():
            shown = value if isinstance(value, (bool, np.bool_)) else f"{value:.6g}"
            print(f"  {key:<22}{shown}")
            lines.append(f"diagnostics.{key}={fmt17(value)}")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_simulate(args):
    params = StructuralParams(args.alpha, args.delta, args.beta, args.gamma)
    ds = simulate_dataset(args.groups, args.size, params, ec=ErrorCoupling(args.phi), seed=args.seed)
    prefix = args.out_prefix
    edge_path, node_path = f"{prefix}_edges.csv", f"{prefix}_nodes.csv"
    try:
        write_dataset(ds, edge_path, node_path)
    except OSError as exc:
        raise DataError(f"cannot write output: {exc}") from exc
    print(f"wrote {edge_path} and {node_path}: {ds.G} groups, {ds.n} agents")
    return EXIT_OK


def cmd_montecarlo(args):
    if args.config:
        cfgs = load_config(args.config)
    else:
        raw = {"phi": args.phi or ["zero", "linear", "exp3", "sine3"]}
        for flag, key in (("groups", "G"), ("size", "n_g"), ("seed", "seed")):
            value = getattr(args, flag)
            if value is not None:
                raw[key] = value
        cfgs = configs_from_dict(raw, where="command line")
    if args.reps is not None:
        cfgs = [replace(cfg, R=args.reps) for cfg in cfgs]
    reports = []
    for cfg in cfgs:
        log.info("running phi=%s with R=%d", cfg.phi, cfg.R)
        reports.append(run_design(cfg, workers=args.workers))
    table = format_table(reports)
    sys.stdout.write(table)
    if args.out:
        lines = []
        for k, rep in enumerate(reports):
            lines += [f"panel{k}.{line}" for line in report_lines(rep)]
        Path(args.out).write_text("\n".join(lines) + "\n")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="peerfx", description="Linear-in-means peer effects with leave-own-out instruments."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="fit the model to edge/node CSV files")
    est.add_argument("--edges", required=True, help="edge list CSV (group_id,i,j)")
    est.add_argument("--nodes", required=True, help="node CSV (group_id,node_id,x[,y])")
    est.add_argument("--mode", choices=("E", "X"), default="E")
    est.add_argument("--steps", type=int, default=4)
    est.add_argument("--model", choices=("full", "baseline"), default="full")
    est.add_argument("--second-moments", action="store_true")
    est.add_argument("--hausman", action="store_true")
    est.add_argument("--hausman-method", choices=("sum", "joint"), default="sum")
    est.add_argument("--diagnostics", action="store_true")
    est.add_argument("--out", help="write key=value results here")
    est.set_defaults(func=cmd_estimate)

    sim = sub.add_parser("simulate", help="write one simulated dataset")
    sim.add_argument("--groups", type=int, default=250)
    sim.add_argument("--size", type=int, default=25)
    sim.add_argument("--phi", choices=PHI_VARIANTS, default="zero")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--alpha", type=float, default=0.0)
    sim.add_argument("--delta", type=float, default=0.5)
    sim.add_argument("--beta", type=float, default=1.0)
    sim.add_argument("--gamma", type=float, default=0.5)
    sim.add_argument("--out-prefix", required=True)
    sim.set_defaults(func=cmd_simulate)

    mc = sub.add_parser("montecarlo", help="run the replication study")
    mc.add_argument("--config", help="TOML run configuration")
    mc.add_argument("--phi", choices=PHI_VARIANTS, action="append")
    mc.add_argument("--groups", type=int)
    mc.add_argument("--size", type=int)
    mc.add_argument("--seed", type=int)
    mc.add_argument("--reps", type=int)
    mc.add_argument("--workers", type=int, default=1)
    mc.add_argument("--out", help="write key=value report here")
    mc.set_defaults(func=cmd_montecarlo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"peerfx: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GraphError, OSError) as exc:
        print(f"peerfx: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (IdentificationError, UndefinedStatisticError, McAbort, np.linalg.LinAlgError) as exc:
        print(f"peerfx: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

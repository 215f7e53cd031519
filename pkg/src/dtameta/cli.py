"""Batch command-line front end.

Subcommands: summary, fit, sa, funnel, simulate.  Results are written as
JSON/CSV files into --out; plots are emitted as JSON point series for a
UI to render.  Exit codes: 0 success, 2 input/validation error, 3 fit
failure.
"""
from __future__ import annotations

import argparse
import json
import pathlib
import sys

from . import __version__
from .data import continuity_correct, logit_transform, parse_dataset, prepare_sample
from .descriptives import forest_series, scatter_data, study_metrics
from .errors import AnalysisError
from .funnel import asymmetry_test
from .glmm import QuadratureConfig, fit_glmm
from .reitsma import BivariateParams, fit_reitsma
from .selection import (
    DEFAULT_P_GRID,
    SelectionMechanism,
    sensitivity_grid,
)
from .simulate import SimConfig, apply_selection, simulate_population
from .sroc import sauc, sop, sroc_curve

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FIT = 3

_INPUT_CODES = {"E_SCHEMA", "E_VALUE", "E_EMPTY", "E_ARM", "E_ZERO", "E_SMALL"}

MECHANISM_ALIASES = {
    "est": "estimated",
    "estimated": "estimated",
    "lndor": "lnDOR",
    "se": "sensitivity",
    "sens": "sensitivity",
    "sensitivity": "sensitivity",
    "sp": "specificity",
    "spec": "specificity",
    "specificity": "specificity",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtameta",
        description="Diagnostic test accuracy meta-analysis with publication-bias sensitivity analysis",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="CSV/TSV file of TP,FP,FN,TN rows")
            p.add_argument("--format", choices=["csv", "tsv", "auto"], default="auto")
            p.add_argument(
                "--correction",
                choices=["zero-studies-only", "all-studies", "none"],
                default="zero-studies-only",
            )
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--config", help="JSON file whose keys mirror the flags")

    p_summary = sub.add_parser("summary", help="descriptive statistics and plot data")
    add_common(p_summary)
    p_summary.add_argument("--alpha", type=float, default=0.05)
    p_summary.add_argument("--shape", choices=["interval", "region"], default="interval")

    p_fit = sub.add_parser("fit", help="fit a bivariate model and SROC geometry")
    add_common(p_fit)
    p_fit.add_argument("--model", choices=["reitsma", "glmm"], default="reitsma")
    p_fit.add_argument("--method", choices=["ml", "reml"], default="ml")
    p_fit.add_argument("--curve", choices=["sroc", "hsroc"], default="sroc")
    p_fit.add_argument("--nodes", type=int, default=7, help="GLMM quadrature nodes per dim")
    p_fit.add_argument("--grid-n", type=int, default=201)

    p_sa = sub.add_parser("sa", help="publication-bias sensitivity analysis grid")
    add_common(p_sa)
    p_sa.add_argument(
        "--mechanisms", default="est,lndor,se,sp",
        help="comma list of est,lndor,se,sp or custom:c1:c2",
    )
    p_sa.add_argument(
        "--p", default=",".join(str(v) for v in DEFAULT_P_GRID),
        help="descending marginal selection probabilities starting at 1",
    )
    p_sa.add_argument("--curve", choices=["sroc", "hsroc"], default="sroc")
    p_sa.add_argument("--form", choices=["probit", "step"], default="probit")
    p_sa.add_argument("--cutoff", type=float, default=1.645, help="step-form cutoff u")

    p_funnel = sub.add_parser("funnel", help="funnel plot data and asymmetry test")
    add_common(p_funnel)

    p_sim = sub.add_parser("simulate", help="generate a synthetic population")
    add_common(p_sim, needs_input=False)
    p_sim.add_argument("--params", required=True,
                       help="mu1,mu2,tau1,tau2,rho of the generating model")
    p_sim.add_argument("--n-studies", type=int, required=True)
    p_sim.add_argument("--arm-law", choices=["fixed", "uniform", "lognormal"],
                       default="fixed")
    p_sim.add_argument("--arm-args", default="200",
                       help="comma list, e.g. 200 / 100,500 / 4.5,0.4")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--select", default=None,
                       help="optional mechanism to truncate by, e.g. lndor")
    p_sim.add_argument("--select-beta", type=float, default=0.3)
    p_sim.add_argument("--cutoff", type=float, default=1.645)

    return parser


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    if getattr(args, "config", None):
        payload = json.loads(pathlib.Path(args.config).read_text())
        for key, value in payload.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                raise AnalysisError(f"unknown config key {key!r}")
            setattr(args, attr, value)
    return args


def _load_table(args):
    raw = pathlib.Path(args.input).read_bytes()
    table, warnings_ = parse_dataset(raw, format=args.format,
                                     source_name=pathlib.Path(args.input).name)
    for w in warnings_:
        print(f"warning: {w}", file=sys.stderr)
    return table


def _outdir(args) -> pathlib.Path:
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(path: pathlib.Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _parse_mechanisms(spec: str, form: str, cutoff: float) -> list[SelectionMechanism]:
    out = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        if item.startswith("custom:"):
            _, c1, c2 = item.split(":")
            out.append(SelectionMechanism.custom(float(c1), float(c2),
                                                 form=form, cutoff_u=cutoff))
        else:
            name = MECHANISM_ALIASES.get(item.lower())
            if name is None:
                raise AnalysisError(f"unknown mechanism {item!r}")
            out.append(SelectionMechanism.preset(name, form=form, cutoff_u=cutoff))
    if not out:
        raise AnalysisError("no mechanisms given")
    return out


def cmd_summary(args) -> int:
    table = _load_table(args)
    corrected = continuity_correct(table, args.correction)
    sample = logit_transform(corrected)
    metrics = study_metrics(sample, corrected, alpha=args.alpha)
    out = _outdir(args)
    _dump(out / "metrics.json", [m.to_json() for m in metrics])
    _dump(out / "forest.json",
          {which: forest_series(metrics, which)
           for which in ("se", "sp", "lnDOR", "lr_pos", "lr_neg")})
    _dump(out / "scatter.json",
          [d.to_json() for d in scatter_data(sample, shape=args.shape, alpha=args.alpha)])
    _dump(out / "transformed.json", sample.to_json())
    return EXIT_OK


def cmd_fit(args) -> int:
    table = _load_table(args)
    if args.model == "reitsma":
        fit = fit_reitsma(prepare_sample(table, args.correction), method=args.method)
    else:
        fit = fit_glmm(table, QuadratureConfig(nodes_per_dim=args.nodes))
    out = _outdir(args)
    _dump(out / "fit.json", fit.to_json())
    _dump(out / "sroc.json", sroc_curve(fit, kind=args.curve, grid_n=args.grid_n).to_json())
    _dump(out / "sauc.json", sauc(fit, kind=args.curve).to_json())
    _dump(out / "sop.json", sop(fit).to_json())
    return EXIT_OK


def cmd_sa(args) -> int:
    table = _load_table(args)
    sample = prepare_sample(table, args.correction)
    mechanisms = _parse_mechanisms(args.mechanisms, args.form, args.cutoff)
    p_values = tuple(float(v) for v in str(args.p).split(","))
    grid = sensitivity_grid(sample, mechanisms, p_values, curve_kind=args.curve)
    out = _outdir(args)
    _dump(out / "grid.json", grid.to_json())
    (out / "grid.csv").write_text(grid.to_csv())
    return EXIT_OK


def cmd_funnel(args) -> int:
    table = _load_table(args)
    sample = prepare_sample(table, args.correction)
    result = asymmetry_test(sample, table)
    _dump(_outdir(args) / "funnel.json", result.to_json())
    return EXIT_OK


def cmd_simulate(args) -> int:
    vals = [float(v) for v in args.params.split(",")]
    if len(vals) != 5:
        raise AnalysisError("--params needs mu1,mu2,tau1,tau2,rho")
    params = BivariateParams(*vals)
    arm_args = tuple(float(v) for v in str(args.arm_args).split(","))
    if args.arm_law in ("fixed", "uniform"):
        arm_args = tuple(int(v) for v in arm_args)
    cfg = SimConfig(params=params, n_studies=args.n_studies,
                    arm_law=args.arm_law, arm_args=arm_args, seed=args.seed)
    table, truth = simulate_population(cfg)
    out = _outdir(args)
    if args.select:
        mech = _parse_mechanisms(args.select, "step", args.cutoff)[0]
        table, empirical_p = apply_selection(
            table, mech, beta=args.select_beta, seed=args.seed
        )
        truth["selection"] = {
            "mechanism": mech.to_json(),
            "beta": args.select_beta,
            "empirical_p": empirical_p,
        }
    lines = ["id,TP,FP,FN,TN"] + [
        f"{r.id},{r.tp},{r.fp},{r.fn},{r.tn}" for r in table.studies
    ]
    (out / "table.csv").write_text("\n".join(lines) + "\n")
    _dump(out / "truth.json", truth)
    return EXIT_OK


_COMMANDS = {
    "summary": cmd_summary,
    "fit": cmd_fit,
    "sa": cmd_sa,
    "funnel": cmd_funnel,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(args)
        return _COMMANDS[args.command](args)
    except AnalysisError as exc:
        code = exc.code
        print(f"{code}: {exc}", file=sys.stderr)
        return EXIT_INPUT if code in _INPUT_CODES or code == "E_UNKNOWN" else EXIT_FIT
    except FileNotFoundError as exc:
        print(f"E_INPUT: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"E_VALUE: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

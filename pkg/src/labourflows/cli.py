"""Command-line entry point.

Exit status is 0 when every stage succeeds, 1 when some stage failed and
2 for configuration or input errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

import numpy as np

from .core import GeneratorMatrix, ShareVector, StateSpace
from .dynamics import aggregate_seasonal, equilibrium
from .exceptions import ConfigError, LabourFlowError, ParseError
from .estimation import count_transitions
from .io import Table, emit_table, write_counts, write_panel
from .pipeline import PipelineConfig, run_pipeline
from .simulator import SimulationSpec, simulate_panel

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2

# stages run by each analysis subcommand (prerequisites are added automatically)
SUBCOMMAND_STAGES = {
    "estimate": ("estimate", "annual"),
    "equilibrium": ("equilibrium",),
    "bootstrap": ("bootstrap", "equilibrium"),
    "decompose": ("decompose",),
    "forecast": ("forecast",),
    "pipeline": None,
}

_FIELD_TYPES = {
    "tau": int, "bootstrap_B": int, "bootstrap_seed": int, "horizon": int, "hp_lambda": float,
}

_FIELD_HELP = {
    "input_path": "panel or counts file",
    "states": "comma-separated state labels, in order",
    "input_format": "'panel' (id,period,state) or 'counts' (period,from,to,count)",
    "period_order": "file listing periods one per line (default: sorted labels)",
    "method": "regularisation: truncate_absorb or redistribute",
    "tau": "periods per year, also the season length (default 4)",
    "bootstrap_B": "bootstrap draws; 0 disables the bootstrap",
    "bootstrap_seed": "bootstrap seed",
    "bootstrap_unit": "resample 'records' (transitions) or whole 'individuals'",
    "target_states": "comma-separated states to decompose (default: all)",
    "reference": "reference rule for frozen rates: initial, mean or hp_trend",
    "mode": "counterfactual shares: one_step or equilibrium",
    "hp_lambda": "HP smoothing parameter (default 1600)",
    "forecast_origin": "last period used for fitting the forecasts (default: last period)",
    "horizon": "forecast horizon in periods",
    "forecast_series": "series to forecast: all, shares or rates",
    "output_dir": "report directory (overridden by $LABOURFLOWS_OUTPUT_DIR)",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with pipeline settings; flags override it")
    for f in dataclasses.fields(PipelineConfig):
        flag = "--" + f.name.replace("_", "-").lower()
        p.add_argument(flag, dest=f.name, type=_FIELD_TYPES.get(f.name, str), default=None,
                       help=_FIELD_HELP.get(f.name, f"config key {f.name!r}"))
    p.add_argument("--input", dest="input_path", default=None, help=argparse.SUPPRESS)


def _config_from_args(args) -> PipelineConfig:
    data = {}
    if args.config:
        cfg = PipelineConfig.from_file(args.config)
        data = dataclasses.asdict(cfg)
    for f in dataclasses.fields(PipelineConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            data[f.name] = v
    if "input_path" not in data or "states" not in data:
        raise ConfigError("--input-path and --states are required (on the command line or in --config)")
    return PipelineConfig.from_dict(data)


def _run_analysis(args) -> int:
    config = _config_from_args(args)
    report = run_pipeline(config, SUBCOMMAND_STAGES[args.command])
    for s in report.stages:
        line = f"{s.name:<12} {s.status}"
        if s.error:
            line += f"  ({s.error})"
        print(line)
    print(f"report written to {report.output_dir}")
    return EXIT_OK if report.ok else EXIT_PARTIAL


def _read_generator_file(path):
    """JSON ``{"states": [...], "Q": [[...]]}`` or ``{"states": ..., "schedule": [Q1, Q2, ...]}``."""
    try:
        with open(path, encoding="utf-8") as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read generator file {path}: {exc}") from None
    if "Q" in spec:
        mats = [spec["Q"]]
    elif "schedule" in spec:
        mats = spec["schedule"]
    else:
        raise ConfigError("generator file needs a 'Q' or 'schedule' entry")
    K = np.asarray(mats[0]).shape[0]
    space = StateSpace(tuple(spec["states"])) if "states" in spec else StateSpace.default(K)
    return [GeneratorMatrix(np.asarray(m, dtype=float), space) for m in mats], spec


def _cmd_simulate(args) -> int:
    schedule, spec = _read_generator_file(args.generator)
    space = schedule[0].space
    if "initial" in spec:
        init = ShareVector(np.asarray(spec["initial"], dtype=float), space)
    else:
        init = equilibrium(aggregate_seasonal(schedule)).shares
    sim = SimulationSpec(schedule, args.n, args.periods, init, seed=args.seed)
    panel = simulate_panel(sim)
    if args.format == "panel":
        write_panel(panel, args.output)
    else:
        pairs = zip(panel.periods[:-1], panel.periods[1:])
        write_counts([count_transitions(panel, a, b) for a, b in pairs], args.output)
    print(f"wrote {panel.n_individuals} individuals x {len(panel.periods)} periods to {args.output}")
    return EXIT_OK


def _cmd_equilibrium(args) -> int:
    if args.generator is None:
        return _run_analysis(args)
    schedule, _ = _read_generator_file(args.generator)
    res = equilibrium(aggregate_seasonal(schedule))
    tab = Table(("state", "share"), [(lab, x) for lab, x in zip(res.shares.space, res.shares.shares)])
    tab.append("spectral_gap", res.spectral_gap)
    tab.append("half_life", res.half_life)
    emit_table(tab, args.output or sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labourflows",
        description="Continuous-time labour market flows from quarterly panel data.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a panel from a generator (JSON)")
    sim.add_argument("--generator", required=True, help="JSON with 'states' and 'Q' or 'schedule'")
    sim.add_argument("--n", type=int, default=10_000, help="number of individuals")
    sim.add_argument("--periods", type=int, default=28, help="number of observed periods")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--format", choices=("panel", "counts"), default="panel")
    sim.add_argument("--output", required=True)
    sim.set_defaults(func=_cmd_simulate)

    helps = {
        "estimate": "per-period and annual generators, fitted shares",
        "equilibrium": "equilibrium shares of a generator file or of estimated annual generators",
        "bootstrap": "bootstrap standard errors and pairwise tests",
        "decompose": "volatility decomposition of the shares",
        "forecast": "counterfactual forecasts with 80/95%% bands",
        "pipeline": "run every stage",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _add_config_flags(p)
        if name == "equilibrium":
            p.add_argument("--generator", help="JSON generator file (skips the data stages)")
            p.add_argument("--output", help="output file for --generator (stdout by default)")
            p.set_defaults(func=_cmd_equilibrium)
        else:
            p.set_defaults(func=_run_analysis)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParseError, LabourFlowError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points: train, monitor, simulate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ._util import atomic_write_text
from .charts import (render_charts_svg, write_chart_csv, write_chart_json,
                     write_surface_csv)
from .config import load_pipeline_config, load_simulation_config, SimulationConfig
from .errors import FrccError, ValidationError
from .fofreg import beta_surface
from .pipeline import monitor_csv, train
from .serialize import dumps_model, load_model
from .simulate import simulate, write_csv, write_truth_json

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_COMPUTATION = 2


def _cmd_train(args) -> int:
    config = load_pipeline_config(args.config)
    result = train(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "model.json", dumps_model(result.model))
    write_chart_csv(result.phase1_results, result.model.monitor, out / "phase1_chart.csv")
    atomic_write_text(out / "diagnostics.json",
                      json.dumps(result.model.diagnostics, indent=1, sort_keys=True) + "\n")
    lo, hi = result.model.basis.domain
    grid = np.linspace(lo, hi, 49)
    for var in result.model.covariates:
        surface = beta_surface(result.model.fof, var, grid, grid)
        write_surface_csv(surface, out / f"beta_{var}.csv")
    counts = result.model.diagnostics["n_components"]
    n_alarm = sum(1 for r in result.phase1_results if r.alarm)
    print(f"trained on {len(result.phase1_results)} Phase I days: "
          f"M={counts['response_M']} L={counts['covariates_L']} R={counts['residual_R']}, "
          f"{n_alarm} Phase I alarm(s)")
    print(f"model written to {out / 'model.json'}")
    return EXIT_OK


def _cmd_monitor(args) -> int:
    model = load_model(args.model)
    results = monitor_csv(model, args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_chart_csv(results, model.monitor, out / "chart.csv")
    write_chart_json(results, model.monitor, out / "chart.json")
    if args.svg:
        render_charts_svg(results, model.monitor, out / "charts.svg")
    n_alarm = sum(1 for r in results if r.alarm)
    print(f"monitored {len(results)} day(s): {n_alarm} alarm(s); outputs in {out}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = load_simulation_config(args.config) if args.config else SimulationConfig()
    sim = simulate(config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(sim, out / "data.csv")
    write_truth_json(sim, out / "truth.json")
    print(f"simulated {config.n_days} days of {len(sim.variables)} variables "
          f"(seed {args.seed}); outputs in {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frcc",
        description="Functional regression control charts for daily sensor profiles")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="calibrate a model on Phase I data")
    p_train.add_argument("--config", required=True, help="pipeline config file")
    p_train.add_argument("--out", default=".", help="output directory (default: cwd)")
    p_train.set_defaults(func=_cmd_train)

    p_mon = sub.add_parser("monitor", help="chart new data with a trained model")
    p_mon.add_argument("--model", required=True, help="model JSON from 'train'")
    p_mon.add_argument("--data", required=True, help="CSV of new observations")
    p_mon.add_argument("--out", required=True, help="output directory")
    p_mon.add_argument("--svg", action="store_true", help="also render SVG charts")
    p_mon.set_defaults(func=_cmd_monitor)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    p_sim.add_argument("--config", default=None, help="simulation config file")
    p_sim.add_argument("--seed", required=True, type=int, help="RNG seed")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FrccError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: run a tuning scenario and write all artifacts.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import BUNDLED_SCENARIOS, ConfigError, ScenarioConfig, apply_overrides, bundled_config_text, parse_config
from .consistency import record_to_csv
from .gp_surrogate import export_grid
from .tuner import consistency_at, run_gpbo, truth_parameters, write_history_csv


def run_scenario(cfg: ScenarioConfig, plots: bool = True) -> int:
    """Execute the tuning session and write history/grid/consistency/session artifacts."""
    scenario = cfg.scenario()
    spec = cfg.design
    tuner_cfg = cfg.tuner

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    start = time.perf_counter()
    session = run_gpbo(spec, tuner_cfg, scenario)
    wall_time = time.perf_counter() - start

    write_history_csv(session, out_dir / "history.csv")
    if spec.d == 1:
        grid_points = 201
    elif spec.d == 2:
        grid_points = 61
    else:
        # keep the lattice to roughly 20k rows for high-dimensional designs
        grid_points = max(2, int(round(20000 ** (1.0 / spec.d))))
    export_grid(session.surrogate, spec.box, out_dir / "surrogate_grid.csv", points_per_dim=grid_points)
    record = consistency_at(
        session.incumbent_q, spec, tuner_cfg, scenario, eval_index=len(session.history)
    )
    record_to_csv(record, out_dir / "consistency.csv")

    truth = truth_parameters(spec, scenario)
    distance = float(np.linalg.norm(session.incumbent_q - truth))
    session_meta = {
        "scenario": cfg.name,
        "config": cfg.echo(),
        "master_seed": tuner_cfg.master_seed,
        "iterations": session.iterations,
        "history_length": len(session.history),
        "incumbent": {
            "parameters": {p.name: float(v) for p, v in zip(spec.parameters, session.incumbent_q)},
            "cost": session.incumbent_cost,
        },
        "truth_parameters": {p.name: float(v) for p, v in zip(spec.parameters, truth)},
        "distance_to_truth": distance,
        "wall_time_s": wall_time,
    }
    with open(out_dir / "session.json", "w", encoding="utf-8") as fh:
        json.dump(session_meta, fh, indent=2)
        fh.write("\n")

    if plots:
        from . import plots as _plots

        _plots.render_session(session, record, spec.box, out_dir, truth=truth)

    labels = ", ".join(
        f"{p.name}={v:.6g}" for p, v in zip(spec.parameters, session.incumbent_q)
    )
    print(f"scenario {cfg.name}: incumbent {labels} with cost {session.incumbent_cost:.6g}")
    print(f"truth: {', '.join(f'{p.name}={v:.6g}' for p, v in zip(spec.parameters, truth))}"
          f" (distance {distance:.6g})")
    print(f"artifacts written to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kftune",
        description="Auto-tune Kalman filter noise covariances by Bayesian optimization "
        "of chi-square consistency costs.",
    )
    parser.add_argument("--config", type=Path, default=None, help="scenario configuration file (JSON)")
    parser.add_argument(
        "--scenario",
        choices=[*BUNDLED_SCENARIOS, "custom"],
        default=None,
        help="bundled scenario to run, or 'custom' with --config (default: case1)",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--iters", type=int, default=None, help="override the iteration budget")
    parser.add_argument("--cost", choices=["nees", "nis"], default=None, help="override the cost statistic")
    parser.add_argument("--out-dir", type=Path, default=None, help="override the output directory")
    parser.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            if args.scenario not in (None, "custom"):
                raise ConfigError("pass either --config or a bundled --scenario, not both")
            try:
                text = args.config.read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read config file: {exc}") from exc
        else:
            scenario = args.scenario or "case1"
            if scenario == "custom":
                raise ConfigError("--scenario custom requires --config")
            text = bundled_config_text(scenario)
        cfg = parse_config(text)
        cfg = apply_overrides(
            cfg,
            seed=args.seed,
            iterations=args.iters,
            cost=args.cost,
            output_dir=str(args.out_dir) if args.out_dir is not None else None,
        )
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        return run_scenario(cfg, plots=not args.no_plots)
    except Exception as exc:  # noqa: BLE001 - CLI boundary maps failures to exit 3
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()

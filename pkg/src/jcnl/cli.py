"""Command-line entry point: ``jcnl generate|solve|compare|thresholds``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .diagnostics import parameter_thresholds
from .experiment import PRESETS, ExperimentConfig, preset_config, run_experiment
from .io import ParseError, ValidationError, load_scenario, save_json, save_metrics, save_scenario
from .model import NoiseModel, ScenarioError, SyntheticConfig, generate_synthetic
from .scnl import ScnlParams, run_scnl
from .solver import SolverParams, run_jcnl


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c", type=float, default=0.11, help="penalty parameter (default 0.11)")
    p.add_argument("--rho", type=float, default=0.11, help="proximal penalty for the directions (default 0.11)")
    p.add_argument("--iters", type=int, default=5000, help="joint-solver iteration budget")
    p.add_argument("--stage1-iters", type=int, default=2000, help="two-stage solver: sensor stage budget")
    p.add_argument("--stage2-iters", type=int, default=2000, help="two-stage solver: target stage budget")
    p.add_argument("--seed", type=int, default=0, help="initialization seed")
    p.add_argument("--init-scale", type=float, default=1.0, help="half-width of the uniform initialization")
    p.add_argument("--record-every", type=int, default=1, help="metrics stride")
    p.add_argument("--workers", type=int, default=1, help="threads per round (results are identical)")
    p.add_argument("--kappa1", type=float, default=None, help="record the potential with this kappa1")
    p.add_argument("--kappa2", type=float, default=None, help="record the potential with this kappa2")
    p.add_argument("--no-timing", action="store_true", help="leave wall_nanos empty for byte-stable CSVs")


def _solver_params(a) -> SolverParams:
    return SolverParams(
        c=a.c, rho=a.rho, max_iters=a.iters, seed=a.seed, init_scale=a.init_scale,
        record_every=a.record_every, kappa1=a.kappa1, kappa2=a.kappa2,
        workers=a.workers, record_wall_time=not a.no_timing,
    )


def _scnl_params(a) -> ScnlParams:
    return ScnlParams(
        c=a.c, rho=a.rho, stage1_iters=a.stage1_iters, stage2_iters=a.stage2_iters,
        seed=a.seed, init_scale=a.init_scale, record_every=a.record_every,
        workers=a.workers, record_wall_time=not a.no_timing,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jcnl", description="Distributed joint sensor/target localization")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a synthetic scenario and write it as JSON")
    g.add_argument("--preset", choices=sorted(PRESETS), default=None)
    g.add_argument("--agents", type=int, default=100)
    g.add_argument("--anchors", type=int, default=8)
    g.add_argument("--region", type=float, nargs=4, metavar=("XMIN", "YMIN", "XMAX", "YMAX"), default=[0, 0, 1, 1])
    g.add_argument("--comm-range", type=float, default=0.3)
    g.add_argument("--noise", choices=["awgn", "range"], default=None)
    g.add_argument("--sigma", type=float, default=0.02)
    g.add_argument("--target", type=float, nargs=2, default=None, metavar=("X", "Y"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="scenario JSON path")

    s = sub.add_parser("solve", help="run one algorithm on a scenario file")
    s.add_argument("scenario")
    s.add_argument("--algo", choices=["jcnl", "scnl"], default="jcnl")
    _add_solver_flags(s)
    s.add_argument("--out", required=True, help="output directory")

    c = sub.add_parser("compare", help="run both algorithms on one scenario with shared seeds")
    c.add_argument("scenario")
    _add_solver_flags(c)
    c.add_argument("--trials", type=int, default=1)
    c.add_argument("--out", required=True, help="output directory")

    t = sub.add_parser("thresholds", help="print the sufficient parameter thresholds")
    t.add_argument("scenario")
    t.add_argument("--c", type=float, required=True)
    t.add_argument("--kappa1", type=float, default=None)
    t.add_argument("--kappa2", type=float, default=None)
    t.add_argument("--rho", type=float, default=None)
    return parser


def _cmd_generate(a) -> int:
    if a.preset:
        cfg = preset_config(a.preset, a.seed, a.noise)
    else:
        lo, hi = tuple(a.region[:2]), tuple(a.region[2:])
        cfg = SyntheticConfig(
            num_agents=a.agents, num_anchors=a.anchors, region=(lo, hi), comm_range=a.comm_range,
            noise=NoiseModel(a.noise or "awgn", a.sigma), seed=a.seed,
            target_position=None if a.target is None else tuple(a.target),
        )
    scn = generate_synthetic(cfg)
    save_scenario(a.out, scn)
    print(f"wrote {a.out}: {scn.num_nodes} nodes, {scn.graph.num_edges} edges")
    return 0


def _result_payload(res) -> dict:
    return {
        "iterations": res.iterations,
        "positions": res.positions,
        "target": res.target,
        "target_estimates": res.target_estimates,
        "wall_seconds": res.wall_seconds,
        "stage_seconds": res.stage_seconds,
        "messages_sent": res.messages_sent,
    }


def _cmd_solve(a) -> int:
    scn = load_scenario(a.scenario)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    res = run_jcnl(scn, _solver_params(a)) if a.algo == "jcnl" else run_scnl(scn, _scnl_params(a))
    save_metrics(out / "metrics.csv", res.trace)
    save_json(out / "result.json", _result_payload(res))
    last = res.trace[-1] if res.trace else None
    if last is not None:
        print(f"{a.algo}: {res.iterations} iterations, rmse_sensor={last.rmse_sensor}, rmse_target={last.rmse_target}")
    return 0


def _cmd_compare(a) -> int:
    cfg = ExperimentConfig(
        scenario=a.scenario, algorithm="both", solver=_solver_params(a), scnl=_scnl_params(a),
        trials=a.trials, base_seed=a.seed, output_dir=a.out,
    )
    result = run_experiment(cfg)
    print(json.dumps(result.summary, indent=2, default=str))
    return 0


def _cmd_thresholds(a) -> int:
    scn = load_scenario(a.scenario)
    rep = parameter_thresholds(scn.graph, scn, scn.dimension, a.c, a.kappa1, a.kappa2, a.rho)
    print(json.dumps(rep.as_dict(), indent=2))
    return 0


COMMANDS = {"generate": _cmd_generate, "solve": _cmd_solve, "compare": _cmd_compare, "thresholds": _cmd_thresholds}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ValidationError, ScenarioError, ValueError, OSError) as exc:
        print(f"jcnl {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

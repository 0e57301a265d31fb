"""Monte-Carlo orchestration and the built-in scenario presets."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .io import load_scenario, save_json, save_metrics
from .model import NoiseModel, ScenarioInstance, SyntheticConfig, generate_synthetic
from .scnl import ScnlParams, run_scnl
from .solver import SolverParams, run_jcnl

__all__ = ["PRESETS", "preset_config", "ExperimentConfig", "ExperimentResult", "run_experiment", "summarize_runs"]


def _synthetic_100(seed: int, noise: str = "awgn") -> SyntheticConfig:
    return SyntheticConfig(
        num_agents=100,
        num_anchors=8,
        region=((0.0, 0.0), (1.0, 1.0)),
        comm_range=0.3,
        noise=NoiseModel(noise, 0.02),
        seed=seed,
    )


def _benchmark_like(seed: int, noise: str = "range") -> SyntheticConfig:
    # 500 sensors and 10 anchors in the origin-centred unit square; the
    # communication range is an assumption chosen to keep draws connected
    return SyntheticConfig(
        num_agents=490,
        num_anchors=10,
        region=((-0.5, -0.5), (0.5, 0.5)),
        comm_range=0.12,
        noise=NoiseModel(noise, 0.02),
        seed=seed,
        target_position=(0.0, 0.0),
    )


PRESETS = {"synthetic-100": _synthetic_100, "benchmark-like": _benchmark_like}


def preset_config(name: str, seed: int = 0, noise: Optional[str] = None) -> SyntheticConfig:
    try:
        make = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return make(seed) if noise is None else make(seed, noise)


@dataclass
class ExperimentConfig:
    """What to run and where to write it.

    ``scenario`` is either a scenario file (used by every trial) or a
    synthetic config whose seed is replaced by ``base_seed + trial``.
    The same per-trial seed drives solver initialization.
    """

    scenario: Union[str, Path, SyntheticConfig, ScenarioInstance]
    algorithm: str = "jcnl"
    solver: SolverParams = field(default_factory=SolverParams)
    scnl: ScnlParams = field(default_factory=ScnlParams)
    trials: int = 1
    base_seed: int = 0
    output_dir: Optional[Union[str, Path]] = None

    def __post_init__(self):
        if self.algorithm not in ("jcnl", "scnl", "both"):
            raise ValueError("algorithm must be 'jcnl', 'scnl' or 'both'")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    def scenario_for(self, trial: int) -> ScenarioInstance:
        src = self.scenario
        if isinstance(src, ScenarioInstance):
            return src
        if isinstance(src, SyntheticConfig):
            return generate_synthetic(dataclasses.replace(src, seed=self.base_seed + trial))
        return load_scenario(src)


def _final(trace, name):
    for rec in reversed(trace):
        v = getattr(rec, name)
        if v is not None:
            return v
    return None


def _stats(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "std": None}
    return {"mean": float(np.mean(vals)), "std": float(np.std(vals))}


def summarize_runs(runs: list, iterations: int) -> dict:
    summary = {
        "trials": len(runs),
        "iterations": iterations,
        "final_rmse_sensor": _stats([_final(r.trace, "rmse_sensor") for r in runs]),
        "final_rmse_target": _stats([_final(r.trace, "rmse_target") for r in runs]),
        "mean_wall_seconds": float(np.mean([r.wall_seconds for r in runs])),
    }
    stages = [r.stage_seconds for r in runs if r.stage_seconds]
    if stages:
        summary["mean_stage_seconds"] = {k: float(np.mean([s[k] for s in stages])) for k in stages[0]}
    return summary


@dataclass
class ExperimentResult:
    summary: dict
    runs: dict


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every trial of every requested algorithm and summarize.

    Per-trial metric CSVs and ``summary.json`` go to ``output_dir`` when set.
    """
    algos = ["jcnl", "scnl"] if config.algorithm == "both" else [config.algorithm]
    out = Path(config.output_dir) if config.output_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    runs = {a: [] for a in algos}
    for trial in range(config.trials):
        scn = config.scenario_for(trial)
        seed = config.base_seed + trial
        for algo in algos:
            if algo == "jcnl":
                res = run_jcnl(scn, dataclasses.replace(config.solver, seed=seed))
            else:
                res = run_scnl(scn, dataclasses.replace(config.scnl, seed=seed))
            runs[algo].append(res)
            if out is not None:
                save_metrics(out / f"{algo}_trial{trial:03d}.csv", res.trace)
    budgets = {"jcnl": config.solver.max_iters, "scnl": config.scnl.stage1_iters + config.scnl.stage2_iters}
    summary = {a: summarize_runs(runs[a], budgets[a]) for a in algos}
    if out is not None:
        save_json(out / "summary.json", summary)
    return ExperimentResult(summary=summary, runs=runs)

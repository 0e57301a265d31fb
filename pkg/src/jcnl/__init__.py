"""Distributed joint localization of sensors and a passive target.

Quick start::

    from jcnl import SyntheticConfig, generate_synthetic, SolverParams, run_jcnl

    scn = generate_synthetic(SyntheticConfig(num_agents=100, num_anchors=8))
    result = run_jcnl(scn, SolverParams(c=0.11, rho=0.11, max_iters=5000))
"""

from .diagnostics import MetricsRecord, ThresholdReport, parameter_thresholds
from .estimators import JCNLLocalizer, SCNLLocalizer
from .experiment import ExperimentConfig, run_experiment
from .io import load_scenario, save_metrics, save_scenario
from .model import (
    Graph,
    NoiseModel,
    ScenarioInstance,
    SyntheticConfig,
    build_graph,
    generate_synthetic,
    scenario_from_truth,
)
from .scnl import ScnlParams, run_scnl
from .solver import SolverParams, SolveResult, run_jcnl

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "NoiseModel",
    "ScenarioInstance",
    "SyntheticConfig",
    "build_graph",
    "generate_synthetic",
    "scenario_from_truth",
    "SolverParams",
    "SolveResult",
    "run_jcnl",
    "ScnlParams",
    "run_scnl",
    "MetricsRecord",
    "ThresholdReport",
    "parameter_thresholds",
    "load_scenario",
    "save_scenario",
    "save_metrics",
    "ExperimentConfig",
    "run_experiment",
    "JCNLLocalizer",
    "SCNLLocalizer",
]

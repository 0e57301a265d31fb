"""scikit-learn style wrappers around the two solvers.

``fit`` takes a scenario (object, JSON path or dict); ``predict`` returns
the estimated node positions and ``predict_target`` the network target
estimate. Hyper-parameters are validated at fit time, following the
scikit-learn convention of leaving ``__init__`` side-effect free.
"""

from __future__ import annotations

from numbers import Integral, Real
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import diagnostics as dg
from .io import load_scenario, scenario_from_dict
from .model import ScenarioInstance
from .scnl import ScnlParams, run_scnl
from .solver import SolverParams, run_jcnl

__all__ = ["check_scenario", "JCNLLocalizer", "SCNLLocalizer"]


def check_scenario(X) -> ScenarioInstance:
    """Coerce a scenario-like input into a validated :class:`ScenarioInstance`."""
    if isinstance(X, ScenarioInstance):
        return X
    if isinstance(X, (str, Path)):
        return load_scenario(X)
    if isinstance(X, dict):
        return scenario_from_dict(X)
    raise TypeError(f"expected a ScenarioInstance, scenario path or dict, got {type(X).__name__}")


def _check_positive(name, value, kind=Real):
    if not isinstance(value, kind) or isinstance(value, bool) or not value > 0:
        raise ValueError(f"{name} must be a positive {kind.__name__.lower()}, got {value!r}")


class _LocalizerBase(BaseEstimator):
    def _store(self, scn: ScenarioInstance, res) -> None:
        self.scenario_ = scn
        self.positions_ = res.positions
        self.target_ = res.target
        self.target_estimates_ = res.target_estimates
        self.trace_ = res.trace
        self.n_iter_ = res.iterations
        self.wall_seconds_ = res.wall_seconds

    def predict(self, X=None) -> np.ndarray:
        """Estimated positions of every node, anchors included."""
        check_is_fitted(self, "positions_")
        if X is not None and check_scenario(X) is not self.scenario_:
            self.fit(X)
        return self.positions_

    def predict_target(self, X=None) -> np.ndarray:
        self.predict(X)
        return self.target_

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).positions_

    def score(self, X=None, y=None) -> float:
        """Negative sensor RMSE against the scenario's ground truth."""
        check_is_fitted(self, "positions_")
        scn = self.scenario_ if X is None else check_scenario(X)
        truth = scn.true_positions if y is None else np.asarray(y, dtype=float)
        return -dg.rmse_sensor(self.predict(X), truth, scn.graph.anchor_ids)


class JCNLLocalizer(_LocalizerBase):
    """Joint sensor and target localization."""

    def __init__(self, c=0.11, rho=0.11, max_iters=1000, seed=0, init_scale=1.0, record_every=1, workers=1):
        self.c = c
        self.rho = rho
        self.max_iters = max_iters
        self.seed = seed
        self.init_scale = init_scale
        self.record_every = record_every
        self.workers = workers

    def fit(self, X, y=None):
        _check_positive("c", self.c)
        _check_positive("rho", self.rho)
        _check_positive("max_iters", self.max_iters, Integral)
        _check_positive("workers", self.workers, Integral)
        scn = check_scenario(X)
        params = SolverParams(
            c=float(self.c), rho=float(self.rho), max_iters=int(self.max_iters), seed=self.seed,
            init_scale=float(self.init_scale), record_every=int(self.record_every), workers=int(self.workers),
        )
        self._store(scn, run_jcnl(scn, params))
        return self


class SCNLLocalizer(_LocalizerBase):
    """Sensors first, then the target with sensors as virtual anchors."""

    def __init__(self, c=0.18, rho=0.18, stage1_iters=2000, stage2_iters=2000, seed=0, init_scale=1.0,
                 record_every=1, workers=1):
        self.c = c
        self.rho = rho
        self.stage1_iters = stage1_iters
        self.stage2_iters = stage2_iters
        self.seed = seed
        self.init_scale = init_scale
        self.record_every = record_every
        self.workers = workers

    def fit(self, X, y=None):
        _check_positive("c", self.c)
        _check_positive("rho", self.rho)
        _check_positive("stage1_iters", self.stage1_iters, Integral)
        _check_positive("stage2_iters", self.stage2_iters, Integral)
        scn = check_scenario(X)
        params = ScnlParams(
            c=float(self.c), rho=float(self.rho), stage1_iters=int(self.stage1_iters),
            stage2_iters=int(self.stage2_iters), seed=self.seed, init_scale=float(self.init_scale),
            record_every=int(self.record_every), workers=int(self.workers),
        )
        res = run_scnl(scn, params)
        self._store(scn, res)
        self.stage_seconds_ = res.stage_seconds
        return self

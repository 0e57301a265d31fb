"""Convergence certificates and error metrics computed on solver iterates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import Graph, ScenarioInstance
from .network import Network, NetworkState
from .operators import (
    Directions,
    NodeLocalVector,
    apply_A,
    apply_A_transpose,
    apply_cBtB,
    apply_D,
    apply_H,
    apply_H_transpose,
    project_XY,
)

__all__ = [
    "NoGroundTruth",
    "AllAnchors",
    "InfeasibleW",
    "MetricsRecord",
    "ThresholdReport",
    "rmse_sensor",
    "rmse_target",
    "smooth_value",
    "grad_z",
    "grad_w",
    "stationarity_S",
    "update_gap_W",
    "feasibility_P",
    "optimality_gap_G",
    "kkt_residuals",
    "augmented_lagrangian",
    "potential",
    "parameter_thresholds",
    "original_objective",
    "optimal_directions",
    "consensus_gap",
    "consensus_vector",
]

FEASIBILITY_SLACK = 1e-9


class NoGroundTruth(ValueError):
    pass


class AllAnchors(ValueError):
    pass


class InfeasibleW(ValueError):
    pass


@dataclass
class MetricsRecord:
    iter: int
    rmse_sensor: Optional[float]
    rmse_target: Optional[float]
    S: float
    W: float
    P: float
    G: float
    potential: Optional[float] = None
    wall_nanos: Optional[int] = None


def rmse_sensor(estimates, truth, anchor_ids) -> float:
    """Root mean squared position error over non-anchor nodes."""
    if truth is None:
        raise NoGroundTruth("scenario carries no true positions")
    est = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    agents = np.setdiff1d(np.arange(len(truth)), np.asarray(list(anchor_ids), dtype=int))
    if len(agents) == 0:
        raise AllAnchors("every node is an anchor; sensor RMSE is undefined")
    err = ((est[agents] - truth[agents]) ** 2).sum()
    return math.sqrt(err / len(agents))


def rmse_target(y_estimates, y_true) -> float:
    """Root mean squared target error, averaged over every node's estimate."""
    if y_true is None:
        raise NoGroundTruth("scenario carries no true target")
    y = np.atleast_2d(np.asarray(y_estimates, dtype=float))
    return math.sqrt(((y - np.asarray(y_true, dtype=float)) ** 2).sum() / len(y))


def smooth_value(net: Network, z: NodeLocalVector, w: Directions) -> float:
    """Smooth part of the split objective, ``sum 0.5|H z|^2 - <D w, H z>``."""
    hz = apply_H(z)
    return 0.5 * hz.sq_norm() - apply_D(w, net.d_half, net.ranges).dot(hz)


def grad_z(net: Network, z: NodeLocalVector, w: Directions) -> NodeLocalVector:
    return apply_H_transpose(apply_H(z) - apply_D(w, net.d_half, net.ranges))


def grad_w(net: Network, z: NodeLocalVector) -> Directions:
    return apply_D(apply_H(z), net.d_half, net.ranges) * -1.0


def _lagrangian_gradient(net: Network, state: NetworkState) -> NodeLocalVector:
    return grad_z(net, state.z, state.w) + apply_A_transpose(state.lam)


def stationarity_S(net: Network, state: NetworkState) -> float:
    return _lagrangian_gradient(net, state).sq_norm()


def update_gap_W(w: Directions, prev_w: Directions) -> float:
    return (w - prev_w).sq_norm()


def feasibility_P(z: NodeLocalVector) -> float:
    return apply_A(z).sq_norm()


def optimality_gap_G(net: Network, state: NetworkState, prev_w: Directions) -> float:
    """Projection-based KKT residual plus feasibility and direction drift."""
    g = _lagrangian_gradient(net, state)
    proj = project_XY(state.z - g, net.rev, net.anchor_mask, net.anchor_pos)
    return (state.z - proj).sq_norm() + feasibility_P(state.z) + update_gap_W(state.w, prev_w)


def kkt_residuals(net: Network, state: NetworkState, prev: NetworkState, c: float, rho: float):
    """Norms of the two stationarity certificates and the worst local infeasibility."""
    dw = state.w - prev.w
    eta1 = apply_H_transpose(apply_D(dw, net.d_half, net.ranges)) * -1.0
    eta1 = eta1 + apply_A_transpose(state.lam - prev.lam) + apply_cBtB(state.z - prev.z, c)
    eta2 = math.sqrt(dw.sq_norm()) * rho
    feas = math.sqrt(float(apply_A(state.z).per_node_sq_norm().max()))
    return math.sqrt(eta1.sq_norm()), eta2, feas


def augmented_lagrangian(net: Network, state: NetworkState, c: float) -> float:
    """Augmented Lagrangian at a feasible ``w`` (the ball indicator is zero)."""
    if state.w.max_block_norm() > 1 + FEASIBILITY_SLACK:
        raise InfeasibleW(f"direction block norm {state.w.max_block_norm():.6g} exceeds 1")
    az = apply_A(state.z)
    return smooth_value(net, state.z, state.w) + state.lam.dot(az) + 0.5 * c * az.sq_norm()


def potential(
    net: Network,
    state: NetworkState,
    prev: NetworkState,
    c: float,
    rho: float,
    kappa1: float,
    kappa2: float,
) -> float:
    """Lyapunov-type merit function that decreases under the parameter thresholds."""
    dz = state.z - prev.z
    dz_btb = dz.dot(apply_cBtB(dz, c)) / c
    extra = (
        kappa1 * feasibility_P(state.z)
        + kappa2 * feasibility_P(prev.z)
        + rho / (2 * c) * update_gap_W(state.w, prev.w)
        + (kappa1 + kappa2) * dz_btb
    )
    return 0.5 * c * extra + augmented_lagrangian(net, state, c)


def consensus_gap(net: Network, z: NodeLocalVector) -> float:
    """Largest disagreement ``|y_i - y_j|`` across edges."""
    if z.y is None:
        return 0.0
    diff = z.y[net.src] - z.y[net.dst]
    return float(np.sqrt((diff**2).sum(1)).max()) if len(diff) else 0.0


@dataclass(frozen=True)
class ThresholdReport:
    N_max: int
    N_sum: int
    d_max: float
    tau_tilde_min: float
    kappa1_min: float
    kappa2_min: float
    rho_min: float
    satisfied: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "N_max": self.N_max,
            "N_sum": self.N_sum,
            "d_max": self.d_max,
            "tau_tilde_min": self.tau_tilde_min,
            "kappa1_min": self.kappa1_min,
            "kappa2_min": self.kappa2_min,
            "rho_min": self.rho_min,
            "satisfied": dict(self.satisfied),
        }


def parameter_thresholds(
    graph: Graph,
    measurements: ScenarioInstance,
    n: int,
    c: float,
    kappa1: Optional[float] = None,
    kappa2: Optional[float] = None,
    rho: Optional[float] = None,
) -> ThresholdReport:
    """Sufficient parameter conditions for a monotone potential.

    ``kappa2_min`` and ``rho_min`` depend on the kappas actually used, so the
    supplied values are plugged in when given and the minima otherwise.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    deg = graph.degrees
    n_max = int(deg.max())
    n_sum = int(deg.sum())
    d_max = measurements.d_max
    tau = float(np.min(5 * (c + 1) ** 2 * deg**2 + (3 * c**2 + 4 * c + 3) * deg))
    k1_min = 6 * (2 * n_max + 2) * (1 + 1 / c)
    k1 = k1_min if kappa1 is None else float(kappa1)
    k2_min = 3 * n_sum * n * (c + 1) ** 2 * (2 * n_max + 1) * k1 / tau
    k2 = k2_min if kappa2 is None else float(kappa2)
    rho_min = 4 * d_max**2 * (k1 + k2)
    satisfied = {}
    if kappa1 is not None:
        satisfied["kappa1"] = k1 >= k1_min
    if kappa2 is not None:
        satisfied["kappa2"] = k2 >= k2_min
    if rho is not None:
        satisfied["rho"] = float(rho) >= rho_min
    return ThresholdReport(n_max, n_sum, d_max, tau, k1_min, k2_min, rho_min, satisfied)


def original_objective(x, y, measurements: ScenarioInstance) -> float:
    """Least-squares range mismatch, each edge counted from both ends."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = 0.0
    for (i, j), d in measurements.edge_distances.items():
        total += (np.linalg.norm(x[i] - x[j]) - d) ** 2
    r = measurements.range_array()
    total += 0.5 * float(((np.linalg.norm(x - y, axis=1) - r) ** 2).sum())
    return total


def optimal_directions(net: Network, x, y) -> Directions:
    """Minimizing unit directions for given positions: normalized differences."""
    x = np.asarray(x, dtype=float)
    v = x[net.src] - x[net.dst]
    u = x - np.asarray(y, dtype=float)

    def unit(a):
        nrm = np.sqrt((a**2).sum(1, keepdims=True))
        return np.divide(a, nrm, out=np.zeros_like(a), where=nrm > 0)

    return Directions(unit(v), unit(u), net.layout)


def consensus_vector(net: Network, x, y) -> NodeLocalVector:
    """The copy-consistent ``z`` in which every copy equals the quantity it copies."""
    x = np.asarray(x, dtype=float)
    ys = np.broadcast_to(np.asarray(y, dtype=float), x.shape).copy()
    return NodeLocalVector(
        x.copy(), x[net.src].copy(), x[net.dst].copy(), ys, ys[net.src].copy(), ys[net.dst].copy(), net.layout
    )

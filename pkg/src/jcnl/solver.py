"""Joint sensor and target localization by distributed proximal ADMM.

One iteration is a bulk-synchronous round:

1. every node computes its preconditioned point ``z~`` from its own state;
2. every node sends, for each neighbor, the four copy blocks that concern
   that neighbor (one message per half-edge);
3. every node combines its own ``z~`` with the inbound blocks in closed form,
   then updates its unit-ball directions and multipliers.

Node-level functions (:func:`compute_z_tilde`, :func:`combine_z_update`,
:func:`update_w`, :func:`update_lambda`) share their arithmetic kernels with
the vectorized network engine, so a node-by-node simulation reproduces the
engine exactly.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import diagnostics as dg
from .model import ScenarioInstance
from .network import Network, NetworkState, concat_chunks, partition_nodes, take_chunk
from .operators import (
    Directions,
    Multipliers,
    NodeLocalVector,
    apply_A,
    apply_A_transpose,
    apply_cBtB,
    apply_D,
    apply_H,
    apply_H_transpose,
    apply_U_inverse,
    project_unit_balls,
)

__all__ = [
    "SolverParams",
    "NodeState",
    "NeighborMessage",
    "MissingMessage",
    "SolveResult",
    "init_states",
    "node_states",
    "compute_z_tilde",
    "combine_z_update",
    "update_w",
    "update_lambda",
    "outgoing_messages",
    "run_jcnl",
    "JCNLEngine",
]


class MissingMessage(KeyError):
    def __init__(self, neighbor: int):
        super().__init__(neighbor)
        self.neighbor = neighbor

    def __str__(self):
        return f"no message received from neighbor {self.neighbor}"


@dataclass(frozen=True)
class SolverParams:
    """Penalties, budget and bookkeeping for one solver run.

    ``kappa1``/``kappa2`` are only needed to record the potential function.
    ``workers`` splits each round over threads; results do not depend on it.
    ``tol`` enables an early exit once ``P + S`` drops below it.
    """

    c: float = 0.11
    rho: float = 0.11
    max_iters: int = 1000
    seed: int = 0
    init_scale: float = 1.0
    record_every: int = 1
    kappa1: Optional[float] = None
    kappa2: Optional[float] = None
    workers: int = 1
    record_wall_time: bool = True
    tol: Optional[float] = None

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("penalty c must be positive")
        if not self.rho > 0:
            raise ValueError("proximal penalty rho must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.init_scale < 0:
            raise ValueError("init_scale must be non-negative")


@dataclass
class NodeState:
    """What a single node knows: its iterate, its measurements, its anchor status."""

    id: int
    neighbors: tuple
    z: NodeLocalVector
    w: Directions
    lam: Multipliers
    d: np.ndarray
    r: Optional[float]
    is_anchor: bool
    anchor_position: Optional[np.ndarray] = None


@dataclass(frozen=True)
class NeighborMessage:
    """Blocks node ``sender`` holds for ``receiver`` after computing ``z~``."""

    sender: int
    receiver: int
    p_tilde_minus: np.ndarray
    p_tilde_plus: np.ndarray
    q_tilde_minus: Optional[np.ndarray] = None
    q_tilde_plus: Optional[np.ndarray] = None


@dataclass
class SolveResult:
    positions: np.ndarray
    target_estimates: Optional[np.ndarray]
    target: Optional[np.ndarray]
    trace: list
    state: NetworkState
    iterations: int
    messages_sent: int = 0
    wall_seconds: float = 0.0
    stage_seconds: dict = field(default_factory=dict)


# ----------------------------------------------------------------- kernels


def _z_tilde_kernel(z, w, lam, d, r, c, anchor_mask, anchor_pos) -> NodeLocalVector:
    rhs = apply_H_transpose(apply_D(w, d, r)) - apply_A_transpose(lam) + apply_cBtB(z, c)
    zt = apply_U_inverse(rhs, c)
    zt.x = np.where(anchor_mask[:, None], anchor_pos, zt.x)
    return zt


def _combine_kernel(zt: NodeLocalVector, in_pm, in_pp, in_qm, in_qp, c) -> NodeLocalVector:
    # in_* hold the neighbor's blocks for the reverse half-edge
    p_minus = (c * zt.p_minus + in_pp) / (c + 1)
    p_plus = (zt.p_plus + c * in_pm) / (c + 1)
    if not zt.has_target:
        return NodeLocalVector(zt.x.copy(), p_minus, p_plus, None, None, None, zt.layout)
    q_minus = 0.5 * (zt.q_minus + in_qp)
    q_plus = 0.5 * (zt.q_plus + in_qm)
    return NodeLocalVector(zt.x.copy(), p_minus, p_plus, zt.y.copy(), q_minus, q_plus, zt.layout)


def _w_kernel(w: Directions, z_new: NodeLocalVector, rho, d, r) -> Directions:
    return project_unit_balls(w + apply_D(apply_H(z_new), d, r) * (1.0 / rho))


def _lambda_kernel(lam: Multipliers, z_new: NodeLocalVector, c) -> Multipliers:
    return lam + apply_A(z_new) * c


# -------------------------------------------------------- node-level API


def compute_z_tilde(state: NodeState, c: float) -> NodeLocalVector:
    """Preconditioned point from the node's current iterate (anchors clamp ``x``)."""
    pos = state.anchor_position if state.is_anchor else np.zeros(state.z.n)
    return _z_tilde_kernel(
        state.z, state.w, state.lam, state.d, state.r, c,
        np.array([state.is_anchor]), np.atleast_2d(pos),
    )


def outgoing_messages(node: int, neighbors: Sequence[int], z_tilde: NodeLocalVector) -> list:
    """Messages one node broadcasts: for each neighbor, the blocks kept for it."""
    out = []
    for k, j in enumerate(neighbors):
        out.append(
            NeighborMessage(
                sender=node,
                receiver=j,
                p_tilde_minus=z_tilde.p_minus[k].copy(),
                p_tilde_plus=z_tilde.p_plus[k].copy(),
                q_tilde_minus=None if z_tilde.q_minus is None else z_tilde.q_minus[k].copy(),
                q_tilde_plus=None if z_tilde.q_plus is None else z_tilde.q_plus[k].copy(),
            )
        )
    return out


def combine_z_update(
    state: NodeState, z_tilde_own: NodeLocalVector, inbound: Mapping[int, NeighborMessage], c: float
) -> NodeLocalVector:
    """Closed-form minimizer of the copy-coupled subproblem for one node."""
    msgs = []
    for j in state.neighbors:
        if j not in inbound:
            raise MissingMessage(j)
        msgs.append(inbound[j])
    n = z_tilde_own.n
    stack = lambda name: np.array([getattr(m, name) for m in msgs], dtype=float).reshape(-1, n)
    target = z_tilde_own.has_target
    return _combine_kernel(
        z_tilde_own,
        stack("p_tilde_minus"),
        stack("p_tilde_plus"),
        stack("q_tilde_minus") if target else None,
        stack("q_tilde_plus") if target else None,
        c,
    )


def update_w(state: NodeState, z_new: NodeLocalVector, rho: float, d=None, r=None) -> Directions:
    d = state.d if d is None else d
    r = state.r if r is None else r
    return _w_kernel(state.w, z_new, rho, d, r)


def update_lambda(state: NodeState, z_new: NodeLocalVector, c: float) -> Multipliers:
    return _lambda_kernel(state.lam, z_new, c)


# ------------------------------------------------------------ network API


def init_states(net: Network, params: SolverParams) -> NetworkState:
    """Uniform random primal start, zero directions and multipliers.

    Draw order is fixed (``x, p-, p+`` then ``y, q-, q+``) so that the
    cooperative-only variant sees the same position draws.
    """
    rng = np.random.default_rng(params.seed)
    s = params.init_scale
    N, E, n = net.num_nodes, net.num_half_edges, net.n
    x = rng.uniform(-s, s, (N, n))
    p_minus = rng.uniform(-s, s, (E, n))
    p_plus = rng.uniform(-s, s, (E, n))
    y = q_minus = q_plus = None
    if net.with_target:
        y = rng.uniform(-s, s, (N, n))
        q_minus = rng.uniform(-s, s, (E, n))
        q_plus = rng.uniform(-s, s, (E, n))
    x[net.anchor_mask] = net.anchor_pos[net.anchor_mask]
    if net.positions_known:
        p_minus = net.anchor_pos[net.src].copy()
        p_plus = net.anchor_pos[net.dst].copy()
    z = NodeLocalVector(x, p_minus, p_plus, y, q_minus, q_plus, net.layout)
    return NetworkState(
        z=z,
        w=Directions.zeros(net.layout, n, net.with_target),
        lam=Multipliers.zeros(net.layout, n, net.with_target),
    )


def node_states(net: Network, state: NetworkState) -> list:
    """Split a network iterate into per-node :class:`NodeState` views."""
    from .network import Chunk

    out = []
    starts = np.concatenate([[0], np.cumsum(net.layout.degree.astype(int))])
    adjacency = net.scenario.graph.adjacency
    for i in range(net.num_nodes):
        lo, hi = int(starts[i]), int(starts[i + 1])
        ch = Chunk(i, i + 1, lo, hi, type(net.layout).single(hi - lo))
        out.append(
            NodeState(
                id=i,
                neighbors=adjacency[i],
                z=take_chunk(state.z, ch).copy(),
                w=take_chunk(state.w, ch).copy(),
                lam=take_chunk(state.lam, ch).copy(),
                d=net.d_half[lo:hi].copy(),
                r=float(net.ranges[i]) if net.with_target else None,
                is_anchor=bool(net.anchor_mask[i]),
                anchor_position=net.anchor_pos[i].copy() if net.anchor_mask[i] else None,
            )
        )
    return out


class JCNLEngine:
    """Vectorized bulk-synchronous executor over a node partition."""

    def __init__(self, net: Network, params: SolverParams):
        self.net = net
        self.params = params
        self.chunks = partition_nodes(net, params.workers)
        self._pool = ThreadPoolExecutor(len(self.chunks)) if len(self.chunks) > 1 else None
        self.messages_sent = 0

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _map(self, fn):
        if self._pool is None:
            return [fn(ch) for ch in self.chunks]
        return list(self._pool.map(fn, self.chunks))

    def z_tilde(self, state: NetworkState) -> NodeLocalVector:
        net, c = self.net, self.params.c

        def work(ch):
            ranges = net.ranges[ch.lo : ch.hi] if net.with_target else None
            return _z_tilde_kernel(
                take_chunk(state.z, ch), take_chunk(state.w, ch), take_chunk(state.lam, ch),
                net.d_half[ch.elo : ch.ehi], ranges, c,
                net.anchor_mask[ch.lo : ch.hi], net.anchor_pos[ch.lo : ch.hi],
            )

        return concat_chunks(self._map(work), net.layout)

    def step(self, state: NetworkState) -> NetworkState:
        net, p = self.net, self.params
        zt = self.z_tilde(state)  # barrier 1: every z~ is available before any exchange
        self.messages_sent += net.num_half_edges

        def work(ch):
            own = take_chunk(zt, ch)
            rv = net.rev[ch.elo : ch.ehi]
            inbound = [None if a is None else a[rv] for a in (zt.p_minus, zt.p_plus, zt.q_minus, zt.q_plus)]
            z_new = _combine_kernel(own, *inbound, p.c)
            if net.positions_known:
                z_new.p_minus = net.anchor_pos[net.src[ch.elo : ch.ehi]]
                z_new.p_plus = net.anchor_pos[net.dst[ch.elo : ch.ehi]]
            ranges = net.ranges[ch.lo : ch.hi] if net.with_target else None
            w_new = _w_kernel(take_chunk(state.w, ch), z_new, p.rho, net.d_half[ch.elo : ch.ehi], ranges)
            lam_new = _lambda_kernel(take_chunk(state.lam, ch), z_new, p.c)
            return z_new, w_new, lam_new

        parts = self._map(work)  # barrier 2
        return NetworkState(
            z=concat_chunks([q[0] for q in parts], net.layout),
            w=concat_chunks([q[1] for q in parts], net.layout),
            lam=concat_chunks([q[2] for q in parts], net.layout),
        )


def _record(net: Network, params: SolverParams, t: int, state, prev, wall_nanos) -> dg.MetricsRecord:
    scn = net.scenario
    rmse_s = rmse_t = None
    if scn.true_positions is not None and not net.anchor_mask.all():
        rmse_s = dg.rmse_sensor(state.z.x, scn.true_positions, scn.graph.anchor_ids)
    if scn.true_target is not None and state.z.has_target:
        rmse_t = dg.rmse_target(state.z.y, scn.true_target)
    pot = None
    if params.kappa1 is not None and params.kappa2 is not None:
        pot = dg.potential(net, state, prev, params.c, params.rho, params.kappa1, params.kappa2)
    return dg.MetricsRecord(
        iter=t,
        rmse_sensor=rmse_s,
        rmse_target=rmse_t,
        S=dg.stationarity_S(net, state),
        W=dg.update_gap_W(state.w, prev.w),
        P=dg.feasibility_P(state.z),
        G=dg.optimality_gap_G(net, state, prev.w),
        potential=pot,
        wall_nanos=wall_nanos if params.record_wall_time else None,
    )


def run_network(
    net: Network,
    params: SolverParams,
    metric_hooks: Sequence[Callable] = (),
    initial: Optional[NetworkState] = None,
) -> SolveResult:
    """Run ``params.max_iters`` rounds on a prepared :class:`Network`."""
    state = init_states(net, params) if initial is None else initial
    trace = []
    elapsed = 0
    t = 0
    with JCNLEngine(net, params) as engine:
        for t in range(1, params.max_iters + 1):
            start = time.perf_counter_ns()
            new = engine.step(state)
            elapsed += time.perf_counter_ns() - start
            prev, state = state, new
            if t % params.record_every == 0 or t == params.max_iters:
                rec = _record(net, params, t, state, prev, elapsed)
                trace.append(rec)
                for hook in metric_hooks:
                    hook(t, state, rec)
                if params.tol is not None and rec.P + rec.S < params.tol:
                    break
        sent = engine.messages_sent
    y = state.z.y
    return SolveResult(
        positions=state.z.x.copy(),
        target_estimates=None if y is None else y.copy(),
        target=None if y is None else y.mean(axis=0),
        trace=trace,
        state=state,
        iterations=t,
        messages_sent=sent,
        wall_seconds=elapsed * 1e-9,
    )


def run_jcnl(
    scenario: ScenarioInstance,
    params: SolverParams,
    metric_hooks: Sequence[Callable] = (),
) -> SolveResult:
    """Jointly estimate agent positions and the target position.

    The reported single target estimate is the mean of the per-node
    estimates; at consensus it equals each of them.
    """
    return run_network(Network.from_scenario(scenario, with_target=True), params, metric_hooks)

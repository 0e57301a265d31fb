"""Brute-force references for tests: dense matrices, an equality-constrained
QP solver, finite differences and a centralized solver.

Everything here is deliberately naive (dense, O(N^3)) and shares no code
with the structured operators beyond the block ordering convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import block_diag

from .model import Graph, ScenarioInstance

__all__ = [
    "SingularSystem",
    "DenseNodeMatrices",
    "build_dense",
    "build_dense_network",
    "xy_constraints",
    "solve_equality_qp",
    "solve_z_subproblem_dense",
    "project_XY_dense",
    "finite_diff_grad",
    "centralized_solve",
    "CentralizedResult",
]


class SingularSystem(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class DenseNodeMatrices:
    H: np.ndarray
    A: np.ndarray
    D: np.ndarray
    cBtB: np.ndarray
    U: np.ndarray


def _scalar_patterns(k: int, with_target: bool):
    """Coordinate patterns with one scalar per block (before ``(x) I_n``)."""
    if with_target:
        size = 4 * k + 2
        ix, ipm, ipp, iy, iqm, iqp = 0, 1, 1 + k, 1 + 2 * k, 2 + 2 * k, 2 + 3 * k
        H = np.zeros((k + 1, size))
        A = np.zeros((3 * k, size))
    else:
        size = 2 * k + 1
        ix, ipm, ipp = 0, 1, 1 + k
        H = np.zeros((k, size))
        A = np.zeros((k, size))
    for j in range(k):
        H[j, ix], H[j, ipp + j] = 1.0, -1.0
        A[j, ix], A[j, ipm + j] = 1.0, -1.0
    if with_target:
        H[k, ix], H[k, iy] = 1.0, -1.0
        for j in range(k):
            A[k + j, iy], A[k + j, iqm + j] = 1.0, -1.0
            A[2 * k + j, iy], A[2 * k + j, iqp + j] = 1.0, -1.0
    return H, A


def build_dense(num_neighbors: int, n: int, c: float, d=None, r=None, with_target: bool = True) -> DenseNodeMatrices:
    """Explicit matrices of one node with ``num_neighbors`` neighbors.

    ``cBtB`` is built as ``c|A^T A| + |H^T H|`` with entrywise absolute
    values, and ``U = H^T H + c A^T A + cBtB``.
    """
    k = int(num_neighbors)
    Hs, As = _scalar_patterns(k, with_target)
    cbtb_s = c * np.abs(As.T @ As) + np.abs(Hs.T @ Hs)
    U_s = Hs.T @ Hs + c * As.T @ As + cbtb_s
    d = np.ones(k) if d is None else np.asarray(d, dtype=float)
    scale = list(d) + ([1.0 if r is None else float(r)] if with_target else [])
    I = np.eye(n)
    return DenseNodeMatrices(
        H=np.kron(Hs, I),
        A=np.kron(As, I),
        D=np.kron(np.diag(scale), I),
        cBtB=np.kron(cbtb_s, I),
        U=np.kron(U_s, I),
    )


def build_dense_network(graph: Graph, n: int, c: float, d_half=None, r=None, with_target: bool = True):
    """Block-diagonal stack of :func:`build_dense` over all nodes.

    ``d_half`` holds distances aligned with ``graph.directed_edges()``.
    """
    mats = []
    start = 0
    for i, nbrs in enumerate(graph.adjacency):
        k = len(nbrs)
        di = None if d_half is None else d_half[start : start + k]
        ri = None if r is None else r[i]
        mats.append(build_dense(k, n, c, di, ri, with_target))
        start += k
    return DenseNodeMatrices(*(block_diag(*[getattr(m, f) for m in mats]) for f in ("H", "A", "D", "cBtB", "U")))


def _offsets(graph: Graph, n: int, with_target: bool):
    """Start index of every node's local vector in the global flat vector."""
    per = [((4 if with_target else 2) * len(nb) + (2 if with_target else 1)) * n for nb in graph.adjacency]
    return np.concatenate([[0], np.cumsum(per)]).astype(int)


def xy_constraints(graph: Graph, n: int, anchor_positions: dict, with_target: bool = True):
    """Equality constraints ``C z = b`` describing the copy-consistency set.

    Rows pin anchor positions and tie each own-position copy held for a
    neighbor to the neighbor's copy of that position (and likewise for the
    target copies).
    """
    offs = _offsets(graph, n, with_target)
    total = offs[-1]
    rows, rhs = [], []

    def unit(idx):
        e = np.zeros(total)
        e[idx] = 1.0
        return e

    def block(i, kind, j_pos):
        k = len(graph.adjacency[i])
        base = offs[i]
        slot = {"x": 0, "pm": 1 + j_pos, "pp": 1 + k + j_pos, "y": 1 + 2 * k, "qm": 2 + 2 * k + j_pos, "qp": 2 + 3 * k + j_pos}[kind]
        return base + slot * n

    for a in graph.anchor_ids:
        for t in range(n):
            rows.append(unit(block(a, "x", 0) + t))
            rhs.append(float(anchor_positions[a][t]))
    for i, nbrs in enumerate(graph.adjacency):
        for jp, j in enumerate(nbrs):
            ip = graph.adjacency[j].index(i)
            pairs = [("pm", "pp")] + ([("qm", "qp")] if with_target else [])
            for own, other in pairs:
                for t in range(n):
                    rows.append(unit(block(i, own, jp) + t) - unit(block(j, other, ip) + t))
                    rhs.append(0.0)
    return np.array(rows).reshape(-1, total), np.array(rhs)


def solve_equality_qp(P: np.ndarray, q_target: np.ndarray, C: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``argmin 0.5 (z - t)^T P (z - t)`` subject to ``C z = b`` via the KKT system."""
    m, total = C.shape
    K = np.block([[P, C.T], [C, np.zeros((m, m))]])
    rhs = np.concatenate([P @ q_target, b])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("KKT solve produced non-finite values")
    return sol[:total]


def solve_z_subproblem_dense(z_tilde_flat, U_all, anchor_positions, graph, n, with_target=True):
    """Minimize ``sum 0.5 |z_i - z~_i|^2_{U_i}`` over the copy-consistency set."""
    C, b = xy_constraints(graph, n, anchor_positions, with_target)
    return solve_equality_qp(U_all, np.asarray(z_tilde_flat, dtype=float), C, b)


def project_XY_dense(z_flat, anchor_positions, graph, n, with_target=True):
    C, b = xy_constraints(graph, n, anchor_positions, with_target)
    return solve_equality_qp(np.eye(len(z_flat)), np.asarray(z_flat, dtype=float), C, b)


def finite_diff_grad(f: Callable[[np.ndarray], float], point, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    if h <= 0:
        raise ValueError("step h must be positive")
    point = np.asarray(point, dtype=float)
    grad = np.zeros_like(point)
    flat = point.ravel()
    g = grad.ravel()
    for k in range(flat.size):
        up = flat.copy()
        dn = flat.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (f(up.reshape(point.shape)) - f(dn.reshape(point.shape))) / (2 * h)
    return grad


@dataclass
class CentralizedResult:
    positions: np.ndarray
    target: np.ndarray
    objective_trace: list


def _objective(scn: ScenarioInstance, x, y):
    total = 0.0
    for (i, j), d in scn.edge_distances.items():
        total += (np.linalg.norm(x[i] - x[j]) - d) ** 2  # both orientations, halved
    for i, r in scn.target_ranges.items():
        total += 0.5 * (np.linalg.norm(x[i] - y) - r) ** 2
    return float(total)


def _unit(v):
    nv = np.linalg.norm(v)
    return v / nv if nv > 0 else np.zeros_like(v)


def centralized_solve(
    scn: ScenarioInstance,
    iters: int = 20000,
    step: Optional[float] = None,
    init_positions=None,
    init_target=None,
    seed: int = 0,
) -> CentralizedResult:
    """Alternating minimization of the smooth reformulation on one machine.

    Each sweep sets every direction to its closed-form optimum (normalized
    difference) and takes one gradient step on positions and target, with
    anchors held fixed. With ``step <= 1/L`` the objective never increases.
    """
    g = scn.graph
    N, n = g.num_nodes, scn.dimension
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (N, n)) if init_positions is None else np.array(init_positions, dtype=float)
    y = rng.uniform(-1, 1, n) if init_target is None else np.array(init_target, dtype=float)
    anchors = np.array(g.anchor_ids)
    x[anchors] = scn.anchor_array()
    if step is None:
        step = 1.0 / max(4 * g.max_degree + 2, 2 * N)
    edges = g.edges
    trace = [_objective(scn, x, y)]
    for _ in range(iters):
        gx = np.zeros_like(x)
        gy = np.zeros(n)
        for i, j in edges:
            diff = x[i] - x[j]
            res = diff - scn.edge_distances[(i, j)] * _unit(diff)
            gx[i] += 2 * res
            gx[j] -= 2 * res
        for i in range(N):
            diff = x[i] - y
            res = diff - scn.target_ranges[i] * _unit(diff)
            gx[i] += res
            gy -= res
        gx[anchors] = 0.0
        x = x - step * gx
        y = y - step * gy
        trace.append(_objective(scn, x, y))
    return CentralizedResult(positions=x, target=y, objective_trace=trace)

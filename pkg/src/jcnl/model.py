"""Network, measurement and scenario types plus the synthetic generator."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

__all__ = [
    "ScenarioError",
    "DisconnectedGraph",
    "NoAnchor",
    "SelfLoop",
    "DuplicateEdge",
    "CannotConnect",
    "Graph",
    "NoiseModel",
    "SyntheticConfig",
    "ScenarioInstance",
    "build_graph",
    "measure_distance",
    "generate_synthetic",
    "MAX_CONNECT_RETRIES",
    "scenario_from_truth",
    "validate_scenario",
]

MAX_CONNECT_RETRIES = 100


class ScenarioError(ValueError):
    """Base class for invalid networks and scenarios."""


class DisconnectedGraph(ScenarioError):
    pass


class NoAnchor(ScenarioError):
    pass


class SelfLoop(ScenarioError):
    pass


class DuplicateEdge(ScenarioError):
    pass


class CannotConnect(ScenarioError):
    pass


def _edge_key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    """Undirected connected sensor graph.

    Neighbor lists are sorted ascending. That order fixes the position of
    every per-neighbor block (copies, directions, multipliers) a node owns.
    """

    num_nodes: int
    anchor_ids: tuple[int, ...]
    adjacency: tuple[tuple[int, ...], ...]

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as ``(i, j)`` with ``i < j``, sorted."""
        return [(i, j) for i, nbrs in enumerate(self.adjacency) for j in nbrs if i < j]

    @property
    def num_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.num_nodes else 0

    @property
    def degree_sum(self) -> int:
        return int(self.degrees.sum())

    @property
    def agent_ids(self) -> tuple[int, ...]:
        anchors = set(self.anchor_ids)
        return tuple(i for i in range(self.num_nodes) if i not in anchors)

    def is_anchor(self, i: int) -> bool:
        return i in self.anchor_ids

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.adjacency[i]

    def directed_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Half-edge arrays ``(src, dst, rev)`` sorted by ``(src, dst)``.

        Half-edge ``e`` is the block node ``src[e]`` keeps for neighbor
        ``dst[e]``; ``rev[e]`` indexes the opposite half-edge.
        """
        src = np.array([i for i, nbrs in enumerate(self.adjacency) for _ in nbrs], dtype=np.int64)
        dst = np.array([j for nbrs in self.adjacency for j in nbrs], dtype=np.int64)
        index = {(int(s), int(d)): e for e, (s, d) in enumerate(zip(src, dst))}
        rev = np.array([index[(int(d), int(s))] for s, d in zip(src, dst)], dtype=np.int64)
        return src, dst, rev


def _check_connected(num_nodes: int, adjacency: Sequence[Sequence[int]]) -> bool:
    if num_nodes == 0:
        return False
    seen = np.zeros(num_nodes, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in adjacency[i]:
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def build_graph(num_nodes: int, anchor_ids: Iterable[int], edges: Iterable[Sequence[int]]) -> Graph:
    """Validate an edge list and return a :class:`Graph`.

    Raises
    ------
    NoAnchor, SelfLoop, DuplicateEdge, DisconnectedGraph
        When the corresponding invariant is violated.
    ScenarioError
        For out-of-range node ids.
    """
    num_nodes = int(num_nodes)
    if num_nodes < 1:
        raise ScenarioError("graph needs at least one node")
    anchors = sorted({int(a) for a in anchor_ids})
    if not anchors:
        raise NoAnchor("at least one anchor is required")
    for a in anchors:
        if not 0 <= a < num_nodes:
            raise ScenarioError(f"anchor id {a} out of range [0, {num_nodes})")

    adjacency: list[set[int]] = [set() for _ in range(num_nodes)]
    for edge in edges:
        i, j = (int(v) for v in edge)
        if not (0 <= i < num_nodes and 0 <= j < num_nodes):
            raise ScenarioError(f"edge ({i}, {j}) references a node outside [0, {num_nodes})")
        if i == j:
            raise SelfLoop(f"self-loop on node {i}")
        if j in adjacency[i]:
            raise DuplicateEdge(f"edge ({i}, {j}) listed twice")
        adjacency[i].add(j)
        adjacency[j].add(i)

    adj = tuple(tuple(sorted(a)) for a in adjacency)
    if not _check_connected(num_nodes, adj):
        raise DisconnectedGraph("graph has more than one connected component")
    return Graph(num_nodes=num_nodes, anchor_ids=tuple(anchors), adjacency=adj)


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean Gaussian range noise.

    ``kind="awgn"`` uses a fixed standard deviation ``sigma_add``;
    ``kind="range"`` scales it by the true distance.
    """

    kind: str = "awgn"
    sigma_add: float = 0.0

    def __post_init__(self):
        if self.kind not in ("awgn", "range"):
            raise ValueError(f"unknown noise kind {self.kind!r}; expected 'awgn' or 'range'")
        if not self.sigma_add >= 0:
            raise ValueError("sigma_add must be non-negative")

    def std(self, true_dist: float) -> float:
        if self.kind == "awgn":
            return self.sigma_add
        return self.sigma_add * true_dist


def measure_distance(true_dist: float, noise: NoiseModel, rng: np.random.Generator) -> float:
    """One noisy range reading, clamped at zero.

    A single standard-normal draw is consumed regardless of the noise level
    so that the RNG stream does not depend on ``sigma_add``.
    """
    if true_dist < 0:
        raise ValueError("true distance must be non-negative")
    draw = rng.standard_normal()
    return max(0.0, float(true_dist + noise.std(true_dist) * draw))


@dataclass(frozen=True)
class SyntheticConfig:
    num_agents: int
    num_anchors: int
    region: tuple[tuple[float, ...], tuple[float, ...]] = ((0.0, 0.0), (1.0, 1.0))
    comm_range: float = 0.3
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    target_position: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        lo, hi = self.region
        if len(lo) != len(hi) or len(lo) not in (2, 3):
            raise ValueError("region must be an axis-aligned box in 2 or 3 dimensions")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("region upper corner must exceed the lower corner")
        if not self.comm_range > 0:
            raise ValueError("comm_range must be positive")
        if self.num_anchors < 1:
            raise ValueError("at least one anchor is required")
        if self.num_agents < 0:
            raise ValueError("num_agents must be non-negative")
        if self.target_position is not None and len(self.target_position) != len(lo):
            raise ValueError("target_position dimension does not match region")

    @property
    def dimension(self) -> int:
        return len(self.region[0])


@dataclass(frozen=True)
class ScenarioInstance:
    """Graph, anchors and measurements; optionally the ground truth.

    Node ids are ``0..N-1``. Edge distances are keyed on ``(i, j)`` with
    ``i < j`` so each unordered pair has one value.
    """

    dimension: int
    graph: Graph
    anchor_positions: Mapping[int, np.ndarray]
    edge_distances: Mapping[tuple[int, int], float]
    target_ranges: Mapping[int, float]
    true_positions: Optional[np.ndarray] = None
    true_target: Optional[np.ndarray] = None

    def __post_init__(self):
        validate_scenario(self)

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def has_truth(self) -> bool:
        return self.true_positions is not None and self.true_target is not None

    def distance(self, i: int, j: int) -> float:
        return self.edge_distances[_edge_key(i, j)]

    def anchor_array(self) -> np.ndarray:
        """``(m, n)`` anchor positions in ``graph.anchor_ids`` order."""
        return np.array([self.anchor_positions[a] for a in self.graph.anchor_ids], dtype=float)

    def half_edge_distances(self) -> np.ndarray:
        """Distances aligned with :meth:`Graph.directed_edges`."""
        return np.array(
            [self.distance(i, j) for i, nbrs in enumerate(self.graph.adjacency) for j in nbrs],
            dtype=float,
        )

    def range_array(self) -> np.ndarray:
        return np.array([self.target_ranges[i] for i in range(self.num_nodes)], dtype=float)

    @property
    def d_max(self) -> float:
        vals = list(self.edge_distances.values()) + list(self.target_ranges.values())
        return float(max(vals))

    def with_anchors(self, positions: np.ndarray) -> "ScenarioInstance":
        """Same measurements with every node turned into an anchor at ``positions``."""
        positions = np.asarray(positions, dtype=float)
        graph = Graph(
            num_nodes=self.graph.num_nodes,
            anchor_ids=tuple(range(self.graph.num_nodes)),
            adjacency=self.graph.adjacency,
        )
        return ScenarioInstance(
            dimension=self.dimension,
            graph=graph,
            anchor_positions={i: positions[i].copy() for i in range(self.num_nodes)},
            edge_distances=dict(self.edge_distances),
            target_ranges=dict(self.target_ranges),
            true_positions=self.true_positions,
            true_target=self.true_target,
        )


def validate_scenario(s: ScenarioInstance) -> None:
    if s.dimension not in (1, 2, 3):
        raise ScenarioError(f"unsupported dimension {s.dimension}")
    g = s.graph
    if set(s.anchor_positions) != set(g.anchor_ids):
        raise ScenarioError("anchor_positions must cover exactly the anchor ids")
    for a, pos in s.anchor_positions.items():
        if np.shape(pos) != (s.dimension,):
            raise ScenarioError(f"anchor {a} position has wrong shape {np.shape(pos)}")
    expected = set(g.edges)
    keys = set(s.edge_distances)
    if keys != expected:
        missing = sorted(expected - keys)
        extra = sorted(keys - expected)
        raise ScenarioError(f"edge distances mismatch graph: missing={missing[:5]} extra={extra[:5]}")
    if any(not (d >= 0) for d in s.edge_distances.values()):
        raise ScenarioError("edge distances must be non-negative")
    if set(s.target_ranges) != set(range(g.num_nodes)):
        raise ScenarioError("target_ranges must be defined for every node")
    if any(not (r >= 0) for r in s.target_ranges.values()):
        raise ScenarioError("target ranges must be non-negative")
    if s.true_positions is not None and np.shape(s.true_positions) != (g.num_nodes, s.dimension):
        raise ScenarioError("true_positions has wrong shape")
    if s.true_target is not None and np.shape(s.true_target) != (s.dimension,):
        raise ScenarioError("true_target has wrong shape")


def _range_graph(points: np.ndarray, comm_range: float) -> list[tuple[int, int]]:
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    ii, jj = np.nonzero(np.triu(dist <= comm_range, k=1))
    return list(zip(ii.tolist(), jj.tolist()))


def generate_synthetic(config: SyntheticConfig) -> ScenarioInstance:
    """Draw a connected random network and its noisy measurements.

    Agents take ids ``0..N-m-1`` and anchors the last ``m`` ids. Positions
    are redrawn (up to :data:`MAX_CONNECT_RETRIES` times) until the
    range graph is connected.
    """
    rng = np.random.default_rng(config.seed)
    lo = np.asarray(config.region[0], dtype=float)
    hi = np.asarray(config.region[1], dtype=float)
    n = config.dimension
    num_nodes = config.num_agents + config.num_anchors
    anchors = range(config.num_agents, num_nodes)

    for _ in range(MAX_CONNECT_RETRIES):
        points = lo + (hi - lo) * rng.random((num_nodes, n))
        if config.target_position is None:
            target = lo + (hi - lo) * rng.random(n)
        else:
            target = np.asarray(config.target_position, dtype=float)
        edges = _range_graph(points, config.comm_range)
        try:
            graph = build_graph(num_nodes, anchors, edges)
        except DisconnectedGraph:
            continue
        break
    else:
        raise CannotConnect(
            f"no connected draw after {MAX_CONNECT_RETRIES} attempts; comm_range "
            f"{config.comm_range} is too small for {num_nodes} nodes"
        )

    distances = {}
    for i, j in graph.edges:
        distances[(i, j)] = measure_distance(float(np.linalg.norm(points[i] - points[j])), config.noise, rng)
    ranges = {}
    for i in range(num_nodes):
        ranges[i] = measure_distance(float(np.linalg.norm(points[i] - target)), config.noise, rng)

    return ScenarioInstance(
        dimension=n,
        graph=graph,
        anchor_positions={a: points[a].copy() for a in anchors},
        edge_distances=distances,
        target_ranges=ranges,
        true_positions=points,
        true_target=target,
    )


def scenario_from_truth(
    positions: np.ndarray,
    target: np.ndarray,
    anchor_ids: Iterable[int],
    edges: Iterable[Sequence[int]],
    noise: Optional[NoiseModel] = None,
    rng: Optional[np.random.Generator] = None,
) -> ScenarioInstance:
    """Build a scenario with measurements taken from explicit true positions."""
    positions = np.asarray(positions, dtype=float)
    target = np.asarray(target, dtype=float)
    noise = noise or NoiseModel()
    rng = rng or np.random.default_rng(0)
    graph = build_graph(len(positions), anchor_ids, edges)
    distances = {
        (i, j): measure_distance(float(np.linalg.norm(positions[i] - positions[j])), noise, rng)
        for i, j in graph.edges
    }
    ranges = {
        i: measure_distance(float(np.linalg.norm(positions[i] - target)), noise, rng)
        for i in range(graph.num_nodes)
    }
    return ScenarioInstance(
        dimension=positions.shape[1],
        graph=graph,
        anchor_positions={a: positions[a].copy() for a in graph.anchor_ids},
        edge_distances=distances,
        target_ranges=ranges,
        true_positions=positions,
        true_target=target,
    )

"""Whole-network view used by the iteration engine and diagnostics.

Per-node vectors of all nodes are stored together in the half-edge layout
of :mod:`jcnl.operators`. A :class:`Network` bundles the static data
(topology, measurements, anchors); a :class:`NetworkState` holds one
iterate ``(z, w, lambda)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ScenarioInstance
from .operators import BlockLayout, Directions, Multipliers, NodeLocalVector

__all__ = ["Network", "NetworkState", "Chunk", "partition_nodes", "take_chunk", "concat_chunks"]


@dataclass(frozen=True, eq=False)
class Network:
    scenario: ScenarioInstance
    layout: BlockLayout
    src: np.ndarray
    dst: np.ndarray
    rev: np.ndarray
    d_half: np.ndarray
    ranges: np.ndarray
    anchor_mask: np.ndarray
    anchor_pos: np.ndarray
    with_target: bool
    # every node is an anchor: position copies are known and held fixed
    positions_known: bool

    @classmethod
    def from_scenario(cls, scn: ScenarioInstance, with_target: bool = True) -> "Network":
        g = scn.graph
        src, dst, rev = g.directed_edges()
        mask = np.zeros(g.num_nodes, dtype=bool)
        mask[list(g.anchor_ids)] = True
        pos = np.zeros((g.num_nodes, scn.dimension))
        for a, p in scn.anchor_positions.items():
            pos[a] = p
        return cls(
            scenario=scn,
            layout=BlockLayout(owner=src, num_nodes=g.num_nodes),
            src=src,
            dst=dst,
            rev=rev,
            d_half=scn.half_edge_distances(),
            ranges=scn.range_array(),
            anchor_mask=mask,
            anchor_pos=pos,
            with_target=with_target,
            positions_known=bool(mask.all()),
        )

    @property
    def n(self) -> int:
        return self.scenario.dimension

    @property
    def num_nodes(self) -> int:
        return self.layout.num_nodes

    @property
    def num_half_edges(self) -> int:
        return len(self.src)


@dataclass(eq=False)
class NetworkState:
    z: NodeLocalVector
    w: Directions
    lam: Multipliers

    def copy(self) -> "NetworkState":
        return NetworkState(self.z.copy(), self.w.copy(), self.lam.copy())

    @property
    def positions(self) -> np.ndarray:
        return self.z.x

    @property
    def target_estimates(self):
        return self.z.y


@dataclass(frozen=True)
class Chunk:
    """Contiguous node range ``[lo, hi)`` and its half-edge range ``[elo, ehi)``."""

    lo: int
    hi: int
    elo: int
    ehi: int
    layout: BlockLayout


def partition_nodes(net: Network, parts: int) -> list[Chunk]:
    """Split nodes into at most ``parts`` contiguous chunks of similar size."""
    N = net.num_nodes
    parts = max(1, min(int(parts), N))
    bounds = np.linspace(0, N, parts + 1).round().astype(int)
    starts = np.concatenate([[0], np.cumsum(net.layout.degree.astype(int))])
    chunks = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi <= lo:
            continue
        elo, ehi = int(starts[lo]), int(starts[hi])
        lay = BlockLayout(owner=net.src[elo:ehi] - lo, num_nodes=int(hi - lo))
        chunks.append(Chunk(int(lo), int(hi), elo, ehi, lay))
    return chunks


def _sl(a, rows):
    return None if a is None else a[rows]


def take_chunk(obj, ch: Chunk):
    """Restrict a network-wide vector to one chunk (views, no copies)."""
    ns, es = slice(ch.lo, ch.hi), slice(ch.elo, ch.ehi)
    if isinstance(obj, NodeLocalVector):
        return NodeLocalVector(
            _sl(obj.x, ns), _sl(obj.p_minus, es), _sl(obj.p_plus, es),
            _sl(obj.y, ns), _sl(obj.q_minus, es), _sl(obj.q_plus, es), ch.layout,
        )
    if isinstance(obj, Directions):
        return Directions(_sl(obj.v, es), _sl(obj.u, ns), ch.layout)
    if isinstance(obj, Multipliers):
        return Multipliers(_sl(obj.l1, es), _sl(obj.l2, es), _sl(obj.l3, es), ch.layout)
    raise TypeError(f"cannot chunk {type(obj).__name__}")


def _cat(parts: Sequence):
    if parts[0] is None:
        return None
    return np.concatenate(parts, axis=0)


def concat_chunks(parts: Sequence, layout: BlockLayout):
    """Inverse of :func:`take_chunk` over a full partition."""
    first = parts[0]
    if isinstance(first, NodeLocalVector):
        fields = NodeLocalVector._fields
        return NodeLocalVector(*[_cat([getattr(p, f) for p in parts]) for f in fields], layout)
    if isinstance(first, Directions):
        return Directions(_cat([p.v for p in parts]), _cat([p.u for p in parts]), layout)
    if isinstance(first, Multipliers):
        return Multipliers(*[_cat([getattr(p, f) for p in parts]) for f in ("l1", "l2", "l3")], layout)
    raise TypeError(f"cannot concatenate {type(first).__name__}")

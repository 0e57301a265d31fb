"""Matrix-free block operators on partitioned per-node vectors.

Every node ``i`` owns a local vector laid out as::

    z_i = [x_i, p-_{i,j} (j in N_i), p+_{i,j} (j in N_i), y_i, q-_{i,j}, q+_{i,j}]

with the per-neighbor blocks in ascending neighbor order. A vector may
hold one node or a whole network: node blocks are stored as ``(m, n)``
arrays and per-neighbor blocks as ``(E, n)`` arrays whose rows are
grouped by an ``owner`` index. All operators act block-wise (the
Kronecker ``(x) I_n`` structure) and never build dense matrices.

Vectors without target blocks (``y is None``) describe the cooperative-only
variant used by the first stage of the two-stage pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional

import numpy as np

__all__ = [
    "BlockLayout",
    "NodeLocalVector",
    "Directions",
    "Multipliers",
    "apply_H",
    "apply_H_transpose",
    "apply_A",
    "apply_A_transpose",
    "apply_D",
    "apply_cBtB",
    "u_diagonal",
    "apply_U",
    "apply_U_inverse",
    "project_unit_balls",
    "project_XY",
]


@dataclass(frozen=True, eq=False)
class BlockLayout:
    """Which node owns each per-neighbor block."""

    owner: np.ndarray
    num_nodes: int

    @classmethod
    def single(cls, num_neighbors: int) -> "BlockLayout":
        return cls(owner=np.zeros(num_neighbors, dtype=np.int64), num_nodes=1)

    @cached_property
    def degree(self) -> np.ndarray:
        return np.bincount(self.owner, minlength=self.num_nodes).astype(float)

    @property
    def num_blocks(self) -> int:
        return len(self.owner)

    def segment_sum(self, blocks: np.ndarray) -> np.ndarray:
        """Sum per-neighbor blocks into their owners: ``(E, n) -> (m, n)``."""
        n = blocks.shape[1]
        out = np.empty((self.num_nodes, n))
        for k in range(n):
            out[:, k] = np.bincount(self.owner, weights=blocks[:, k], minlength=self.num_nodes)
        return out

    def spread(self, node_blocks: np.ndarray) -> np.ndarray:
        """Copy each node block to every per-neighbor slot it owns."""
        return node_blocks[self.owner]


def _zeros_like(a):
    return None if a is None else np.zeros_like(a)


@dataclass(eq=False)
class NodeLocalVector:
    """Primal state ``z``: own position, target estimate and neighbor copies."""

    x: np.ndarray
    p_minus: np.ndarray
    p_plus: np.ndarray
    y: Optional[np.ndarray]
    q_minus: Optional[np.ndarray]
    q_plus: Optional[np.ndarray]
    layout: BlockLayout

    _fields = ("x", "p_minus", "p_plus", "y", "q_minus", "q_plus")

    @classmethod
    def for_node(cls, x, p_minus, p_plus, y=None, q_minus=None, q_plus=None) -> "NodeLocalVector":
        """Single-node vector from ``n``-vectors and ``(N_i, n)`` block stacks."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p_minus = np.asarray(p_minus, dtype=float).reshape(-1, x.shape[1])
        p_plus = np.asarray(p_plus, dtype=float).reshape(-1, x.shape[1])
        if y is not None:
            y = np.atleast_2d(np.asarray(y, dtype=float))
            q_minus = np.asarray(q_minus, dtype=float).reshape(-1, x.shape[1])
            q_plus = np.asarray(q_plus, dtype=float).reshape(-1, x.shape[1])
        return cls(x, p_minus, p_plus, y, q_minus, q_plus, BlockLayout.single(len(p_minus)))

    @classmethod
    def zeros(cls, layout: BlockLayout, n: int, with_target: bool = True) -> "NodeLocalVector":
        node = lambda: np.zeros((layout.num_nodes, n))
        edge = lambda: np.zeros((layout.num_blocks, n))
        if with_target:
            return cls(node(), edge(), edge(), node(), edge(), edge(), layout)
        return cls(node(), edge(), edge(), None, None, None, layout)

    @classmethod
    def from_flat(cls, flat: np.ndarray, layout: BlockLayout, n: int, with_target: bool = True):
        """Inverse of :meth:`flat` for node-contiguous layouts."""
        out = cls.zeros(layout, n, with_target)
        flat = np.asarray(flat, dtype=float)
        pos = 0
        starts = np.concatenate([[0], np.cumsum(layout.degree.astype(int))])
        for i in range(layout.num_nodes):
            k = int(layout.degree[i])
            sl = slice(starts[i], starts[i + 1])
            names = ("x", "p_minus", "p_plus", "y", "q_minus", "q_plus") if with_target else ("x", "p_minus", "p_plus")
            for name in names:
                rows = 1 if name in ("x", "y") else k
                chunk = flat[pos : pos + rows * n].reshape(rows, n)
                pos += rows * n
                if name in ("x", "y"):
                    getattr(out, name)[i] = chunk[0]
                else:
                    getattr(out, name)[sl] = chunk
        if pos != len(flat):
            raise ValueError(f"flat vector has length {len(flat)}, layout needs {pos}")
        return out

    @property
    def has_target(self) -> bool:
        return self.y is not None

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def arrays(self):
        return [getattr(self, f) for f in self._fields if getattr(self, f) is not None]

    def _combine(self, other, op):
        kw = {}
        for f in self._fields:
            a, b = getattr(self, f), getattr(other, f)
            kw[f] = None if a is None else op(a, b)
        return NodeLocalVector(layout=self.layout, **kw)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, alpha: float):
        kw = {f: (None if getattr(self, f) is None else alpha * getattr(self, f)) for f in self._fields}
        return NodeLocalVector(layout=self.layout, **kw)

    __rmul__ = __mul__

    def dot(self, other: "NodeLocalVector") -> float:
        return float(sum(np.sum(a * b) for a, b in zip(self.arrays(), other.arrays())))

    def sq_norm(self) -> float:
        return self.dot(self)

    def copy(self) -> "NodeLocalVector":
        kw = {f: (None if getattr(self, f) is None else getattr(self, f).copy()) for f in self._fields}
        return NodeLocalVector(layout=self.layout, **kw)

    def per_node_sq_norm(self) -> np.ndarray:
        out = (self.x**2).sum(1)
        out = out + self.layout.segment_sum(self.p_minus**2 + self.p_plus**2).sum(1)
        if self.has_target:
            out = out + (self.y**2).sum(1)
            out = out + self.layout.segment_sum(self.q_minus**2 + self.q_plus**2).sum(1)
        return out

    def flat(self) -> np.ndarray:
        """Concatenate node by node in ``[x, p-, p+, y, q-, q+]`` order."""
        parts = []
        for i in range(self.layout.num_nodes):
            mask = self.layout.owner == i
            parts += [self.x[i], self.p_minus[mask].ravel(), self.p_plus[mask].ravel()]
            if self.has_target:
                parts += [self.y[i], self.q_minus[mask].ravel(), self.q_plus[mask].ravel()]
        return np.concatenate(parts)


@dataclass(eq=False)
class Directions:
    """Per-neighbor blocks ``v`` and one node block ``u``.

    Holds the auxiliary unit-ball variables ``w`` and, equally, anything in
    the range of ``H`` (the ``(N_i + 1)``-block space).
    """

    v: np.ndarray
    u: Optional[np.ndarray]
    layout: BlockLayout

    @classmethod
    def for_node(cls, v, u=None) -> "Directions":
        v = np.atleast_2d(np.asarray(v, dtype=float))
        if u is not None:
            u = np.atleast_2d(np.asarray(u, dtype=float))
        return cls(v, u, BlockLayout.single(len(v)))

    @classmethod
    def zeros(cls, layout: BlockLayout, n: int, with_target: bool = True) -> "Directions":
        u = np.zeros((layout.num_nodes, n)) if with_target else None
        return cls(np.zeros((layout.num_blocks, n)), u, layout)

    def arrays(self):
        return [self.v] if self.u is None else [self.v, self.u]

    def __add__(self, other):
        return Directions(self.v + other.v, None if self.u is None else self.u + other.u, self.layout)

    def __sub__(self, other):
        return Directions(self.v - other.v, None if self.u is None else self.u - other.u, self.layout)

    def __mul__(self, alpha: float):
        return Directions(alpha * self.v, None if self.u is None else alpha * self.u, self.layout)

    __rmul__ = __mul__

    def dot(self, other: "Directions") -> float:
        return float(sum(np.sum(a * b) for a, b in zip(self.arrays(), other.arrays())))

    def sq_norm(self) -> float:
        return self.dot(self)

    def per_node_sq_norm(self) -> np.ndarray:
        out = self.layout.segment_sum(self.v**2).sum(1)
        if self.u is not None:
            out = out + (self.u**2).sum(1)
        return out

    def copy(self) -> "Directions":
        return Directions(self.v.copy(), None if self.u is None else self.u.copy(), self.layout)

    def max_block_norm(self) -> float:
        norms = [np.sqrt((a**2).sum(1)) for a in self.arrays() if len(a)]
        return float(max((m.max() for m in norms), default=0.0))

    def flat(self) -> np.ndarray:
        parts = []
        for i in range(self.layout.num_nodes):
            parts.append(self.v[self.layout.owner == i].ravel())
            if self.u is not None:
                parts.append(self.u[i])
        return np.concatenate(parts)


# Alias matching the role the unit-ball variables play in the algorithm.
AuxiliaryDirections = Directions


@dataclass(eq=False)
class Multipliers:
    """Dual blocks: ``l1`` (position copies), ``l2`` (q-), ``l3`` (q+)."""

    l1: np.ndarray
    l2: Optional[np.ndarray]
    l3: Optional[np.ndarray]
    layout: BlockLayout

    @classmethod
    def for_node(cls, l1, l2=None, l3=None) -> "Multipliers":
        l1 = np.atleast_2d(np.asarray(l1, dtype=float))
        if l2 is not None:
            l2 = np.atleast_2d(np.asarray(l2, dtype=float))
            l3 = np.atleast_2d(np.asarray(l3, dtype=float))
        return cls(l1, l2, l3, BlockLayout.single(len(l1)))

    @classmethod
    def zeros(cls, layout: BlockLayout, n: int, with_target: bool = True) -> "Multipliers":
        e = lambda: np.zeros((layout.num_blocks, n))
        return cls(e(), e() if with_target else None, e() if with_target else None, layout)

    def arrays(self):
        return [a for a in (self.l1, self.l2, self.l3) if a is not None]

    def _map2(self, other, op):
        f = lambda a, b: None if a is None else op(a, b)
        return Multipliers(f(self.l1, other.l1), f(self.l2, other.l2), f(self.l3, other.l3), self.layout)

    def __add__(self, other):
        return self._map2(other, np.add)

    def __sub__(self, other):
        return self._map2(other, np.subtract)

    def __mul__(self, alpha: float):
        f = lambda a: None if a is None else alpha * a
        return Multipliers(f(self.l1), f(self.l2), f(self.l3), self.layout)

    __rmul__ = __mul__

    def dot(self, other: "Multipliers") -> float:
        return float(sum(np.sum(a * b) for a, b in zip(self.arrays(), other.arrays())))

    def sq_norm(self) -> float:
        return self.dot(self)

    def per_node_sq_norm(self) -> np.ndarray:
        return self.layout.segment_sum(sum(a**2 for a in self.arrays())).sum(1)

    def copy(self) -> "Multipliers":
        f = lambda a: None if a is None else a.copy()
        return Multipliers(f(self.l1), f(self.l2), f(self.l3), self.layout)

    def flat(self) -> np.ndarray:
        parts = []
        for i in range(self.layout.num_nodes):
            mask = self.layout.owner == i
            parts += [a[mask].ravel() for a in self.arrays()]
        return np.concatenate(parts)


def apply_H(z: NodeLocalVector) -> Directions:
    """Residuals ``x_i - p+_{i,j}`` per neighbor and ``x_i - y_i``."""
    lay = z.layout
    v = lay.spread(z.x) - z.p_plus
    u = z.x - z.y if z.has_target else None
    return Directions(v, u, lay)


def apply_H_transpose(g: Directions) -> NodeLocalVector:
    lay = g.layout
    x = lay.segment_sum(g.v)
    if g.u is None:
        return NodeLocalVector(x, np.zeros_like(g.v), -g.v, None, None, None, lay)
    zero = np.zeros_like(g.v)
    return NodeLocalVector(x + g.u, zero, -g.v, -g.u, zero.copy(), zero.copy(), lay)


def apply_A(z: NodeLocalVector) -> Multipliers:
    """Copy-consistency residuals ``x - p-``, ``y - q-``, ``y - q+``."""
    lay = z.layout
    l1 = lay.spread(z.x) - z.p_minus
    if not z.has_target:
        return Multipliers(l1, None, None, lay)
    ys = lay.spread(z.y)
    return Multipliers(l1, ys - z.q_minus, ys - z.q_plus, lay)


def apply_A_transpose(lam: Multipliers) -> NodeLocalVector:
    lay = lam.layout
    x = lay.segment_sum(lam.l1)
    zero = np.zeros_like(lam.l1)
    if lam.l2 is None:
        return NodeLocalVector(x, -lam.l1, zero, None, None, None, lay)
    y = lay.segment_sum(lam.l2 + lam.l3)
    return NodeLocalVector(x, -lam.l1, zero, y, -lam.l2, -lam.l3, lay)


def apply_D(w: Directions, d: np.ndarray, r: Optional[np.ndarray]) -> Directions:
    """Scale direction blocks by their measured distance (``d`` per block, ``r`` per node)."""
    d = np.asarray(d, dtype=float).reshape(-1, 1)
    v = d * w.v
    if w.u is None:
        return Directions(v, None, w.layout)
    r = np.asarray(r, dtype=float).reshape(-1, 1)
    return Directions(v, r * w.u, w.layout)


def apply_cBtB(z: NodeLocalVector, c: float) -> NodeLocalVector:
    """``c B^T B z`` with ``c B^T B = c|A^T A| + |H^T H|``."""
    lay = z.layout
    deg = lay.degree[:, None]
    xs = lay.spread(z.x)
    x = (c + 1) * deg * z.x + c * lay.segment_sum(z.p_minus) + lay.segment_sum(z.p_plus)
    p_minus = c * xs + c * z.p_minus
    p_plus = xs + z.p_plus
    if not z.has_target:
        return NodeLocalVector(x, p_minus, p_plus, None, None, None, lay)
    x = x + z.x + z.y
    ys = lay.spread(z.y)
    y = z.x + (2 * c * deg + 1) * z.y + c * lay.segment_sum(z.q_minus) + c * lay.segment_sum(z.q_plus)
    return NodeLocalVector(x, p_minus, p_plus, y, c * ys + c * z.q_minus, c * ys + c * z.q_plus, lay)


def u_diagonal(layout: BlockLayout, n: int, c: float, with_target: bool = True) -> NodeLocalVector:
    """Diagonal of ``U = H^T H + c A^T A + c B^T B`` as a vector."""
    deg = layout.degree[:, None] * np.ones((1, n))
    e = np.ones((layout.num_blocks, n))
    if with_target:
        return NodeLocalVector(
            2 * ((c + 1) * deg + 1), 2 * c * e, 2 * e, 2 * (2 * c * deg + 1), 2 * c * e, 2 * c * e, layout
        )
    return NodeLocalVector(2 * (c + 1) * deg, 2 * c * e, 2 * e, None, None, None, layout)


def _scale(z: NodeLocalVector, diag: NodeLocalVector, op) -> NodeLocalVector:
    return z._combine(diag, op)


def apply_U(z: NodeLocalVector, c: float) -> NodeLocalVector:
    return _scale(z, u_diagonal(z.layout, z.n, c, z.has_target), np.multiply)


def apply_U_inverse(z: NodeLocalVector, c: float) -> NodeLocalVector:
    diag = u_diagonal(z.layout, z.n, c, z.has_target)
    # an isolated node has no position blocks in the cooperative variant
    diag.x[diag.x == 0] = 1.0
    return _scale(z, diag, np.divide)


def project_unit_balls(w: Directions) -> Directions:
    """Scale every block onto the closed unit ball, ``b / max(1, |b|)``."""

    def proj(a):
        norms = np.sqrt((a**2).sum(1, keepdims=True))
        return a / np.maximum(1.0, norms)

    return Directions(proj(w.v), None if w.u is None else proj(w.u), w.layout)


def project_XY(
    z: NodeLocalVector,
    rev: np.ndarray,
    anchor_mask: np.ndarray,
    anchor_positions: np.ndarray,
) -> NodeLocalVector:
    """Euclidean projection of a network-wide stack onto the copy constraints.

    The constraint set pins anchor positions and ties, for every half-edge
    ``(i, j)``, the copy ``p-_{i,j}`` node ``i`` keeps of its own position to
    the copy ``p+_{j,i}`` its neighbor holds (likewise ``q-_{i,j}`` to
    ``q+_{j,i}``). Those pairs are disjoint, so the projection averages each
    pair. ``anchor_positions`` is an ``(N, n)`` array read only where
    ``anchor_mask`` is set.
    """
    x = np.where(anchor_mask[:, None], anchor_positions, z.x)
    p_minus = 0.5 * (z.p_minus + z.p_plus[rev])
    p_plus = p_minus[rev]
    if not z.has_target:
        return NodeLocalVector(x, p_minus, p_plus, None, None, None, z.layout)
    q_minus = 0.5 * (z.q_minus + z.q_plus[rev])
    q_plus = q_minus[rev]
    return NodeLocalVector(x, p_minus, p_plus, z.y.copy(), q_minus, q_plus, z.layout)


def with_layout(obj, layout: BlockLayout):
    return replace(obj, layout=layout)

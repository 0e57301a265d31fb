"""Random instances shared by the test modules."""

import numpy as np

from jcnl.model import build_graph, scenario_from_truth, NoiseModel
from jcnl.network import Network, NetworkState
from jcnl.solver import (
    combine_z_update,
    compute_z_tilde,
    node_states,
    outgoing_messages,
    update_lambda,
    update_w,
)
from jcnl.operators import Directions, Multipliers, NodeLocalVector


def random_connected_edges(rng, num_nodes, extra=0.4):
    """Random spanning tree plus a few extra edges."""
    order = rng.permutation(num_nodes)
    edges = set()
    for k in range(1, num_nodes):
        a, b = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    for i in range(num_nodes):
        for j in range(i + 1, num_nodes):
            if rng.random() < extra:
                edges.add((i, j))
    return sorted(edges)


def random_scenario(rng, num_nodes=5, n=2, num_anchors=1, sigma=0.0, extra=0.4):
    positions = rng.random((num_nodes, n))
    target = rng.random(n)
    anchors = rng.choice(num_nodes, size=num_anchors, replace=False).tolist()
    edges = random_connected_edges(rng, num_nodes, extra)
    return scenario_from_truth(positions, target, anchors, edges, NoiseModel("awgn", sigma), rng)


def random_z(rng, net: Network, with_target=True):
    N, E, n = net.num_nodes, net.num_half_edges, net.n
    g = lambda *s: rng.normal(size=s)
    if with_target:
        return NodeLocalVector(g(N, n), g(E, n), g(E, n), g(N, n), g(E, n), g(E, n), net.layout)
    return NodeLocalVector(g(N, n), g(E, n), g(E, n), None, None, None, net.layout)


def random_w(rng, net: Network, with_target=True, feasible=False):
    N, E, n = net.num_nodes, net.num_half_edges, net.n
    v = rng.normal(size=(E, n))
    u = rng.normal(size=(N, n)) if with_target else None
    w = Directions(v, u, net.layout)
    if feasible:
        from jcnl.operators import project_unit_balls

        w = project_unit_balls(w * 0.9)
    return w


def random_lambda(rng, net: Network, with_target=True):
    E, n = net.num_half_edges, net.n
    if with_target:
        return Multipliers(*(rng.normal(size=(E, n)) for _ in range(3)), net.layout)
    return Multipliers(rng.normal(size=(E, n)), None, None, net.layout)


def random_state(rng, net: Network, feasible_w=True):
    return NetworkState(
        random_z(rng, net, net.with_target),
        random_w(rng, net, net.with_target, feasible_w),
        random_lambda(rng, net, net.with_target),
    )


def single_node_layout_vectors(rng, k, n, with_target=True):
    """Random single-node z, w (as H-range blocks) and multipliers with ``k`` neighbors."""
    z = NodeLocalVector.for_node(
        rng.normal(size=n), rng.normal(size=(k, n)), rng.normal(size=(k, n)),
        *((rng.normal(size=n), rng.normal(size=(k, n)), rng.normal(size=(k, n))) if with_target else ()),
    )
    g = Directions.for_node(rng.normal(size=(k, n)), rng.normal(size=n) if with_target else None)
    lam = Multipliers.for_node(
        rng.normal(size=(k, n)), *((rng.normal(size=(k, n)), rng.normal(size=(k, n))) if with_target else ())
    )
    return z, g, lam


def per_node_round(net, state, c, rho):
    """One iteration executed node by node through explicit messages."""
    nodes = node_states(net, state)
    tildes = [compute_z_tilde(s, c) for s in nodes]
    mailbox = {}
    for s, zt in zip(nodes, tildes):
        for msg in outgoing_messages(s.id, s.neighbors, zt):
            mailbox.setdefault(msg.receiver, {})[msg.sender] = msg
    out = []
    for s, zt in zip(nodes, tildes):
        z_new = combine_z_update(s, zt, mailbox[s.id], c)
        out.append((z_new, update_w(s, z_new, rho), update_lambda(s, z_new, c)))
    cat = lambda objs, name: None if getattr(objs[0], name) is None else np.concatenate([getattr(o, name) for o in objs])
    zs, ws, ls = zip(*out)
    return NetworkState(
        NodeLocalVector(*(cat(zs, f) for f in NodeLocalVector._fields), net.layout),
        Directions(cat(ws, "v"), cat(ws, "u"), net.layout),
        Multipliers(cat(ls, "l1"), cat(ls, "l2"), cat(ls, "l3"), net.layout),
    )

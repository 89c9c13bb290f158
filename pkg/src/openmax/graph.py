"""Immutable network snapshots, membership churn, and graph generators.

A snapshot is a value: a frozen node set plus a frozen set of normalized
undirected edges.  Membership changes never mutate a snapshot; they produce a
new one via :func:`apply_churn`.  :class:`ChurnMemory` keeps the incident
edges of deactivated nodes so a later reactivation restores the prior
topology restricted to currently active endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

__all__ = [
    "NetworkSnapshot",
    "NodePartition",
    "ChurnEvent",
    "ChurnMemory",
    "neighbors",
    "is_connected",
    "diameter",
    "partition_nodes",
    "line_graph",
    "barabasi_albert",
    "induced_subgraph",
    "apply_churn",
    "snapshot_to_text",
    "snapshot_from_text",
]


def _normalize_edge(u: int, v: int) -> tuple[int, int]:
    u, v = int(u), int(v)
    if u == v:
        raise ValueError(f"self loop on node {u} is not allowed")
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class NetworkSnapshot:
    """Undirected graph value with hashable, order-free equality.

    Edges are stored as ``(low, high)`` pairs; any iterable of pairs passed to
    the constructor is normalized.  Isolated nodes are legal members.
    """

    nodes: frozenset[int]
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", frozenset(int(n) for n in self.nodes))
        object.__setattr__(
            self, "edges", frozenset(_normalize_edge(u, v) for u, v in self.edges)
        )
        for u, v in self.edges:
            if u not in self.nodes or v not in self.nodes:
                raise ValueError(f"edge ({u}, {v}) references a node outside the snapshot")

    @cached_property
    def sorted_nodes(self) -> tuple[int, ...]:
        return tuple(sorted(self.nodes))

    @cached_property
    def adjacency(self) -> dict[int, tuple[int, ...]]:
        adj: dict[int, list[int]] = {n: [] for n in self.sorted_nodes}
        for u, v in sorted(self.edges):
            adj[u].append(v)
            adj[v].append(u)
        return {n: tuple(sorted(adj[n])) for n in self.sorted_nodes}

    @property
    def n(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class NodePartition:
    """Split of a membership change into arriving, departing and remaining sets."""

    arriving: frozenset[int]
    departing: frozenset[int]
    remaining: frozenset[int]


@dataclass(frozen=True)
class ChurnEvent:
    """Single membership event.

    ``kind`` is ``"deactivate"`` or ``"activate"``.  For activation,
    ``restore_edges`` carries the remembered incident edges; only those whose
    other endpoint is currently active are re-added.
    """

    kind: str
    node: int
    restore_edges: frozenset[tuple[int, int]] = field(default=frozenset())

    def __post_init__(self) -> None:
        if self.kind not in ("deactivate", "activate"):
            raise ValueError(f"unknown churn event kind {self.kind!r}")
        object.__setattr__(self, "node", int(self.node))
        object.__setattr__(
            self,
            "restore_edges",
            frozenset(_normalize_edge(u, v) for u, v in self.restore_edges),
        )


def neighbors(g: NetworkSnapshot, i: int) -> tuple[int, ...]:
    """Sorted neighbors of node ``i``; the node itself is never included."""
    try:
        return g.adjacency[i]
    except KeyError:
        raise KeyError(f"node {i} is not active in this snapshot") from None


def _bfs_distances(g: NetworkSnapshot, source: int) -> dict[int, int]:
    dist = {source: 0}
    frontier = [source]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for v in g.adjacency[u]:
                if v not in dist:
                    dist[v] = d
                    nxt.append(v)
        frontier = nxt
    return dist


def is_connected(g: NetworkSnapshot) -> bool:
    if not g.nodes:
        return False
    start = g.sorted_nodes[0]
    return len(_bfs_distances(g, start)) == g.n


def diameter(g: NetworkSnapshot) -> float:
    """Longest shortest-path length; 0 for one node, ``math.inf`` if disconnected."""
    if not g.nodes:
        raise ValueError("diameter of an empty snapshot is undefined")
    best = 0
    for s in g.sorted_nodes:
        dist = _bfs_distances(g, s)
        if len(dist) != g.n:
            return math.inf
        ecc = max(dist.values())
        if ecc > best:
            best = ecc
    return best


def partition_nodes(v_now: Iterable[int], v_next: Iterable[int]) -> NodePartition:
    """Classify nodes across one tick: arriving, departing, remaining."""
    now = frozenset(int(n) for n in v_now)
    nxt = frozenset(int(n) for n in v_next)
    return NodePartition(
        arriving=nxt - now,
        departing=now - nxt,
        remaining=now & nxt,
    )


def line_graph(n: int) -> NetworkSnapshot:
    """Path on nodes 1..n, so the diameter is n - 1."""
    if n < 1:
        raise ValueError("a line graph needs at least one node")
    nodes = range(1, n + 1)
    edges = [(i, i + 1) for i in range(1, n)]
    return NetworkSnapshot(frozenset(nodes), frozenset(edges))


def barabasi_albert(
    seed_graph: NetworkSnapshot,
    target_n: int,
    edges_per_new_node: int,
    rng: np.random.Generator,
) -> tuple[NetworkSnapshot, tuple[int, ...]]:
    """Grow a scale-free graph by degree-proportional preferential attachment.

    Parameters
    ----------
    seed_graph : NetworkSnapshot
        Connected starting graph.  New nodes get ids above its largest id.
    target_n : int
        Total number of nodes in the grown graph.
    edges_per_new_node : int
        Distinct attachment targets per inserted node (capped by the current
        size).  Targets are drawn proportionally to current degree, without
        replacement within one insertion.
    rng : numpy.random.Generator
        Source of attachment randomness.

    Returns
    -------
    (NetworkSnapshot, tuple[int, ...])
        The grown graph and the node insertion order (seed nodes first, in id
        order, then generated nodes in creation order).  The trailing entries
        of the order are what membership churn rules such as "the last m
        nodes added" refer to.
    """
    if not is_connected(seed_graph):
        raise ValueError("seed graph must be connected")
    if target_n < seed_graph.n:
        raise ValueError("target size is smaller than the seed graph")
    if edges_per_new_node < 1:
        raise ValueError("each new node must attach with at least one edge")

    order: list[int] = list(seed_graph.sorted_nodes)
    edges: set[tuple[int, int]] = set(seed_graph.edges)
    # Degree-proportional sampling pool: every edge contributes both endpoints.
    pool: list[int] = [n for e in sorted(edges) for n in e]
    next_id = order[-1] + 1

    while len(order) < target_n:
        k = min(edges_per_new_node, len(order))
        targets: set[int] = set()
        if pool:
            while len(targets) < k:
                targets.add(pool[int(rng.integers(len(pool)))])
        else:
            targets.update(order[:k])  # degenerate one-node seed
        for t in sorted(targets):
            edges.add(_normalize_edge(t, next_id))
            pool.extend((t, next_id))
        order.append(next_id)
        next_id += 1

    snapshot = NetworkSnapshot(frozenset(order), frozenset(edges))
    return snapshot, tuple(order)


def induced_subgraph(g: NetworkSnapshot, keep: Iterable[int]) -> NetworkSnapshot:
    """Snapshot restricted to ``keep`` and the edges among those nodes."""
    kept = frozenset(int(n) for n in keep)
    missing = kept - g.nodes
    if missing:
        raise ValueError(f"nodes {sorted(missing)} are not active in this snapshot")
    return NetworkSnapshot(
        kept, frozenset(e for e in g.edges if e[0] in kept and e[1] in kept)
    )


def apply_churn(g: NetworkSnapshot, event: ChurnEvent) -> NetworkSnapshot:
    """Apply one membership event, returning a new snapshot.

    Deactivation drops the node and its incident edges; the network must stay
    nonempty.  Activation adds the node plus every remembered edge whose other
    endpoint is active.
    """
    if event.kind == "deactivate":
        if event.node not in g.nodes:
            raise ValueError(f"cannot deactivate node {event.node}: not active")
        nodes = g.nodes - {event.node}
        if not nodes:
            raise ValueError("deactivation would empty the network")
        edges = frozenset(e for e in g.edges if event.node not in e)
        return NetworkSnapshot(nodes, edges)

    if event.node in g.nodes:
        raise ValueError(f"cannot activate node {event.node}: already active")
    nodes = g.nodes | {event.node}
    restored = frozenset(e for e in event.restore_edges if e[0] in nodes and e[1] in nodes)
    return NetworkSnapshot(nodes, g.edges | restored)


class ChurnMemory:
    """Bookkeeping for reversible churn.

    Records the incident edges of each node at deactivation time and replays
    them (restricted to active endpoints) when the node is reactivated.
    """

    def __init__(self) -> None:
        self._remembered: dict[int, frozenset[tuple[int, int]]] = {}

    def deactivate(self, g: NetworkSnapshot, node: int) -> NetworkSnapshot:
        incident = frozenset(e for e in g.edges if node in e)
        out = apply_churn(g, ChurnEvent("deactivate", node))
        self._remembered[int(node)] = incident
        return out

    def activate(self, g: NetworkSnapshot, node: int) -> NetworkSnapshot:
        remembered = self._remembered.pop(int(node), frozenset())
        return apply_churn(g, ChurnEvent("activate", node, remembered))


def snapshot_to_text(g: NetworkSnapshot) -> str:
    """Serialize to an edge-list block: a ``nodes:`` header then one edge per line."""
    lines = ["nodes: " + " ".join(str(n) for n in g.sorted_nodes)]
    lines.extend(f"{u} {v}" for u, v in sorted(g.edges))
    return "\n".join(lines) + "\n"


def snapshot_from_text(text: str) -> NetworkSnapshot:
    """Parse the :func:`snapshot_to_text` format; isolated nodes survive the trip."""
    nodes: frozenset[int] | None = None
    edges: list[tuple[int, int]] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("nodes:"):
            if nodes is not None:
                raise ValueError("duplicate nodes: header")
            nodes = frozenset(int(tok) for tok in line[len("nodes:"):].split())
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"malformed edge line {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if nodes is None:
        raise ValueError("missing nodes: header")
    return NetworkSnapshot(nodes, frozenset(edges))

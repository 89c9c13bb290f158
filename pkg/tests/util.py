"""Shared helpers for the test suite: small random graphs and churn scripts."""

from __future__ import annotations

import numpy as np

from openmax.graph import NetworkSnapshot


def random_connected_graph(
    rng: np.random.Generator, n: int, extra_edge_prob: float = 0.3
) -> NetworkSnapshot:
    """Random connected graph on nodes 1..n: random tree plus extra edges."""
    edges: set[tuple[int, int]] = set()
    for i in range(2, n + 1):
        j = int(rng.integers(1, i))
        edges.add((j, i))
    for u in range(1, n + 1):
        for v in range(u + 1, n + 1):
            if (u, v) not in edges and rng.random() < extra_edge_prob:
                edges.add((u, v))
    return NetworkSnapshot(frozenset(range(1, n + 1)), frozenset(edges))


def floyd_warshall_diameter(g: NetworkSnapshot) -> float:
    """Independent diameter computation used as an oracle against BFS."""
    order = g.sorted_nodes
    idx = {n: i for i, n in enumerate(order)}
    size = len(order)
    dist = np.full((size, size), np.inf)
    np.fill_diagonal(dist, 0.0)
    for u, v in g.edges:
        dist[idx[u], idx[v]] = 1.0
        dist[idx[v], idx[u]] = 1.0
    for k in range(size):
        dist = np.minimum(dist, dist[:, k : k + 1] + dist[k : k + 1, :])
    return float(dist.max())

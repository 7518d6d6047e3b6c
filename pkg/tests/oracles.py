"""Brute-force reference implementations, kept independent of the package internals."""

from itertools import combinations, permutations

import numpy as np

from fpsim.core import AccessGraph


def mapping_cost(g1: AccessGraph, g2: AccessGraph, mapping: dict) -> int:
    """Uniform edit cost induced by a node mapping g1 -> g2 (value None = delete)."""
    lab1, lab2 = g1.labels(), g2.labels()
    e1, e2 = g1.edge_map(), g2.edge_map()
    cost = 0
    for u, v in mapping.items():
        if v is None or lab1[u] != lab2[v]:
            cost += 1
    images = {v for v in mapping.values() if v is not None}
    cost += sum(1 for v in lab2 if v not in images)
    for (a, b), conn in e1.items():
        va, vb = mapping[a], mapping[b]
        if va is None or vb is None:
            cost += 1
            continue
        other = e2.get((min(va, vb), max(va, vb)))
        if other is None or other != conn:
            cost += 1
    inv = {v: u for u, v in mapping.items() if v is not None}
    for (a, b) in e2:
        if a in inv and b in inv and (min(inv[a], inv[b]), max(inv[a], inv[b])) in e1:
            continue
        cost += 1
    return cost


def all_mappings(ids1, ids2):
    """Every partial injection of ids1 into ids2."""
    n1 = len(ids1)
    for k in range(min(n1, len(ids2)) + 1):
        for src in combinations(ids1, k):
            for dst in permutations(ids2, k):
                m = {u: None for u in ids1}
                m.update(zip(src, dst))
                yield m


def brute_force_ged(g1: AccessGraph, g2: AccessGraph) -> int:
    return min(mapping_cost(g1, g2, m) for m in all_mappings(g1.node_ids(), g2.node_ids()))


def brute_isomorphic(g1: AccessGraph, g2: AccessGraph, attribute_aware: bool = True) -> bool:
    if g1.order != g2.order or len(g1.edges) != len(g2.edges):
        return False
    ids1, ids2 = g1.node_ids(), g2.node_ids()
    lab1, lab2 = g1.labels(), g2.labels()
    e1, e2 = g1.edge_map(), g2.edge_map()
    for perm in permutations(ids2):
        m = dict(zip(ids1, perm))
        if attribute_aware and any(lab1[u] != lab2[m[u]] for u in ids1):
            continue
        ok = True
        for (a, b), conn in e1.items():
            other = e2.get((min(m[a], m[b]), max(m[a], m[b])))
            if other is None or (attribute_aware and other != conn):
                ok = False
                break
        if ok:
            return True
    return False


def random_graph(rng: np.random.Generator, max_nodes: int, n_types: int = 3, p_edge: float = 0.4,
                 min_nodes: int = 1) -> AccessGraph:
    n = int(rng.integers(min_nodes, max_nodes + 1))
    types = [int(t) for t in rng.integers(0, n_types, size=n)]
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p_edge:
                edges.append((a, b, "door" if rng.random() < 0.6 else "adjacent"))
    return AccessGraph.build(types, edges)


def pixel_count_miou(x1, x2, background):
    """mIoU by explicit per-pixel counting loops."""
    x1 = np.asarray(x1).ravel().tolist()
    x2 = np.asarray(x2).ravel().tolist()
    classes = sorted((set(x1) | set(x2)) - {background})
    total = 0.0
    for c in classes:
        inter = sum(1 for a, b in zip(x1, x2) if a == c and b == c)
        union = sum(1 for a, b in zip(x1, x2) if a == c or b == c)
        total += inter / union
    return total / len(classes)

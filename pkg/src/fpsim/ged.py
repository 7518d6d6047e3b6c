"""Exact graph edit distance on access graphs, plus isomorphism helpers.

Edit paths are induced by node mappings: every node of ``g1`` is either
substituted by a distinct node of ``g2`` or deleted, and unmapped nodes of
``g2`` are inserted. Edge operations follow from the mapping. The exact
solver is an A* over partial mappings; ``ged_beam`` is a budgeted
depth-first branch and bound used when graphs exceed the exact budget.
"""

from __future__ import annotations

import heapq
import logging
import threading
from collections import Counter
from dataclasses import dataclass
from itertools import count

import networkx as nx
import numpy as np
from networkx.algorithms import isomorphism as nxiso
from scipy.optimize import linear_sum_assignment

from .core import AccessGraph, Edge, FpsimError, Node

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 12

_EDGE_CODE = {"door": 1, "adjacent": 2}
_EDGE_NAME = {1: "door", 2: "adjacent"}


class BudgetExceeded(FpsimError):
    pass


class EmptyGraph(FpsimError):
    pass


@dataclass(frozen=True)
class CostTable:
    """Per-operation costs. Identity substitutions are always free."""

    node_ins: int = 1
    node_del: int = 1
    node_sub: int = 1
    edge_ins: int = 1
    edge_del: int = 1
    edge_sub: int = 1

    def __post_init__(self):
        if min(self.node_ins, self.node_del, self.node_sub, self.edge_ins, self.edge_del, self.edge_sub) < 0:
            raise ValueError("edit costs must be non-negative")
        if self.node_sub > self.node_ins + self.node_del or self.edge_sub > self.edge_ins + self.edge_del:
            raise ValueError("a substitution may not cost more than a deletion plus an insertion")


UNIFORM = CostTable()


@dataclass(frozen=True)
class EditOp:
    """One edit. Node ids live in the working graph: ``g1`` ids, then fresh ids for insertions."""

    kind: str
    a: int
    b: int | None = None
    old: object = None
    new: object = None

    def __str__(self):
        target = f"{self.a}" if self.b is None else f"{self.a}-{self.b}"
        if self.kind.endswith("substitute"):
            return f"{self.kind} {target}: {self.old} -> {self.new}"
        if self.kind.endswith("insert"):
            return f"{self.kind} {target}: {self.new}"
        return f"{self.kind} {target}: {self.old}"


@dataclass(frozen=True)
class EditPath:
    operations: tuple[EditOp, ...]
    total_cost: int
    node_map: tuple[tuple[int, int | None], ...] = ()  # (g1 id, g2 id or None)

    def __len__(self):
        return len(self.operations)


class _Pair:
    """Index-based view of a graph pair prepared for search."""

    def __init__(self, g1: AccessGraph, g2: AccessGraph, costs: CostTable):
        self.g1, self.g2, self.costs = g1, g2, costs
        self.ids1 = g1.node_ids()
        self.ids2 = g2.node_ids()
        self.n1, self.n2 = len(self.ids1), len(self.ids2)
        self.lab1 = [n.room_type for n in g1.nodes]
        self.lab2 = [n.room_type for n in g2.nodes]
        self.adj1 = self._matrix(g1, self.ids1)
        self.adj2 = self._matrix(g2, self.ids2)
        self.door1, self.adjt1 = self._masks(self.adj1)
        self.door2, self.adjt2 = self._masks(self.adj2)
        degree = [sum(1 for x in row if x) for row in self.adj1]
        # dense nodes first: their edge costs surface early
        self.order = sorted(range(self.n1), key=lambda i: (-degree[i], self.ids1[i]))
        self.full2 = (1 << self.n2) - 1
        self.A1 = np.array(self.adj1, dtype=np.int64).reshape(self.n1, self.n1)
        self.A2 = np.array(self.adj2, dtype=np.int64).reshape(self.n2, self.n2)
        self.L1 = np.array(self.lab1, dtype=np.int64)
        self.L2 = np.array(self.lab2, dtype=np.int64)
        c = costs
        self.EC = np.array(
            [[0, c.edge_ins, c.edge_ins], [c.edge_del, 0, c.edge_sub], [c.edge_del, c.edge_sub, 0]], dtype=float
        )

    @staticmethod
    def _matrix(g, ids):
        pos = {nid: i for i, nid in enumerate(ids)}
        m = [[0] * len(ids) for _ in ids]
        for e in g.edges:
            i, j = pos[e.a], pos[e.b]
            m[i][j] = m[j][i] = _EDGE_CODE[e.connectivity]
        return m

    @staticmethod
    def _masks(m):
        door, adjt = [], []
        for row in m:
            d = a = 0
            for j, x in enumerate(row):
                if x == 1:
                    d |= 1 << j
                elif x == 2:
                    a |= 1 << j
            door.append(d)
            adjt.append(a)
        return door, adjt

    def node_cost(self, i, j):
        if j is None:
            return self.costs.node_del
        return 0 if self.lab1[i] == self.lab2[j] else self.costs.node_sub

    def edge_cost(self, x, y):
        if x == y:
            return 0
        if x == 0:
            return self.costs.edge_ins
        if y == 0:
            return self.costs.edge_del
        return self.costs.edge_sub

    def step_cost(self, depth, assign, j):
        """Cost of mapping g1 node ``order[depth]`` to ``j`` (None = delete) given earlier choices."""
        i = self.order[depth]
        row1 = self.adj1[i]
        c = self.node_cost(i, j)
        if j is None:
            for p in range(depth):
                if row1[self.order[p]]:
                    c += self.costs.edge_del
            return c
        row2 = self.adj2[j]
        for p in range(depth):
            jp = assign[p]
            x = row1[self.order[p]]
            if jp is None:
                if x:
                    c += self.costs.edge_del
            else:
                y = row2[jp]
                if x != y:
                    c += self.edge_cost(x, y)
        return c

    def completion_cost(self, used):
        """Insert every unused g2 node and each g2 edge touching one."""
        free = self.full2 & ~used
        c = 0
        seen_edges = 0
        for j in range(self.n2):
            if free >> j & 1:
                c += self.costs.node_ins
                seen_edges += (self.door2[j] | self.adjt2[j]).bit_count()
                # edges with both ends free are counted twice above
        both = 0
        for j in range(self.n2):
            if free >> j & 1:
                both += ((self.door2[j] | self.adjt2[j]) & free).bit_count()
        return c + (seen_edges - both // 2) * self.costs.edge_ins

    def _multiset_bound(self, na, nb, common, c_del, c_ins, c_sub):
        return (
            max(na - nb, 0) * c_del
            + max(nb - na, 0) * c_ins
            + (min(na, nb) - common) * min(c_sub, c_del + c_ins)
        )

    def multiset_bound(self, depth, assign, used):
        """Cheap admissible bound on the remaining cost.

        Node labels of the unprocessed g1 nodes are matched as a multiset
        against the unused g2 nodes. Remaining edges split into disjoint
        groups that can only map onto each other: edges from each processed
        g1 node to unprocessed ones (against edges from its image to unused
        g2 nodes), and edges among unprocessed nodes on both sides.
        """
        costs = self.costs
        rem1 = 0
        for p in range(depth, self.n1):
            rem1 |= 1 << self.order[p]
        free2 = self.full2 & ~used

        c1 = Counter(self.lab1[self.order[p]] for p in range(depth, self.n1))
        c2 = Counter(self.lab2[j] for j in range(self.n2) if free2 >> j & 1)
        common = sum(min(v, c2[k]) for k, v in c1.items())
        h = self._multiset_bound(self.n1 - depth, sum(c2.values()), common, costs.node_del, costs.node_ins, costs.node_sub)

        ed, ea = costs.edge_del, costs.edge_ins
        es = costs.edge_sub
        for p in range(depth):
            i = self.order[p]
            ad = (self.door1[i] & rem1).bit_count()
            aa = (self.adjt1[i] & rem1).bit_count()
            j = assign[p]
            if j is None:
                h += (ad + aa) * ed
                continue
            bd = (self.door2[j] & free2).bit_count()
            ba = (self.adjt2[j] & free2).bit_count()
            if ad or aa or bd or ba:
                h += self._multiset_bound(ad + aa, bd + ba, min(ad, bd) + min(aa, ba), ed, ea, es)

        ad = aa = 0
        for p in range(depth, self.n1):
            i = self.order[p]
            ad += (self.door1[i] & rem1).bit_count()
            aa += (self.adjt1[i] & rem1).bit_count()
        bd = ba = 0
        for j in range(self.n2):
            if free2 >> j & 1:
                bd += (self.door2[j] & free2).bit_count()
                ba += (self.adjt2[j] & free2).bit_count()
        ad, aa, bd, ba = ad // 2, aa // 2, bd // 2, ba // 2
        h += self._multiset_bound(ad + aa, bd + ba, min(ad, bd) + min(aa, ba), ed, ea, es)
        return h

    def assignment_bound(self, depth, assign, used):
        """Admissible bound from a linear assignment over the remaining nodes.

        Matching remaining g1 node u to unused g2 node v costs the node
        substitution, the exact cost of every edge towards already mapped
        nodes, and half the multiset bound of edges towards other remaining
        nodes (each such edge is shared by two endpoints).
        """
        r1 = [self.order[p] for p in range(depth, self.n1)]
        r2 = [j for j in range(self.n2) if not used >> j & 1]
        n_r1, n_r2 = len(r1), len(r2)
        if n_r1 == 0 and n_r2 == 0:
            return 0
        c = self.costs
        mapped = [(self.order[p], assign[p]) for p in range(depth) if assign[p] is not None]
        dropped = [self.order[p] for p in range(depth) if assign[p] is None]
        R1, R2 = np.array(r1, dtype=np.int64), np.array(r2, dtype=np.int64)
        A1r, A2r = self.A1[R1], self.A2[R2]

        # half-edge costs among remaining nodes
        ff1 = A1r[:, R1]
        ff2 = A2r[:, R2]
        d1, a1 = (ff1 == 1).sum(1), (ff1 == 2).sum(1)
        d2, a2 = (ff2 == 1).sum(1), (ff2 == 2).sum(1)
        t1, t2 = (d1 + a1)[:, None], (d2 + a2)[None, :]
        common = np.minimum(d1[:, None], d2[None, :]) + np.minimum(a1[:, None], a2[None, :])
        sub = (
            np.maximum(t1 - t2, 0) * c.edge_del
            + np.maximum(t2 - t1, 0) * c.edge_ins
            + (np.minimum(t1, t2) - common) * min(c.edge_sub, c.edge_del + c.edge_ins)
        ) * 0.5
        sub = sub + (self.L1[R1][:, None] != self.L2[R2][None, :]) * float(c.node_sub)
        dele = (d1 + a1) * 0.5 * c.edge_del + c.node_del
        ins = (d2 + a2) * 0.5 * c.edge_ins + c.node_ins
        if mapped:
            P = np.array([u for u, _ in mapped], dtype=np.int64)
            Q = np.array([v for _, v in mapped], dtype=np.int64)
            X, Y = A1r[:, P], A2r[:, Q]
            sub = sub + self.EC[X[:, None, :], Y[None, :, :]].sum(-1)
            dele = dele + (X != 0).sum(1) * c.edge_del
            ins = ins + (Y != 0).sum(1) * c.edge_ins
        if dropped:
            extra = (A1r[:, np.array(dropped, dtype=np.int64)] != 0).sum(1) * c.edge_del
            sub = sub + extra[:, None]
            dele = dele + extra

        big = 1e9
        size = n_r1 + n_r2
        m = np.zeros((size, size))
        m[:n_r1, :n_r2] = sub
        m[:n_r1, n_r2:] = big
        m[np.arange(n_r1), n_r2 + np.arange(n_r1)] = dele
        m[n_r1:, :n_r2] = big
        m[n_r1 + np.arange(n_r2), np.arange(n_r2)] = ins
        rows, cols = linear_sum_assignment(m)
        return int(np.ceil(m[rows, cols].sum() - 1e-9))

    def heuristic(self, depth, assign, used):
        if self.n1 - depth <= 1:
            return self.multiset_bound(depth, assign, used)
        return max(self.multiset_bound(depth, assign, used), self.assignment_bound(depth, assign, used))

    def children(self, depth, assign, used):
        """(cost increment, j) for each option of the next g1 node; ``None`` deletes it."""
        out = []
        for j in range(self.n2):
            if not used >> j & 1:
                out.append((self.step_cost(depth, assign, j), j))
        out.append((self.step_cost(depth, assign, None), None))
        return out

    def path_from(self, assign) -> EditPath:
        """Materialize the edit path of a complete mapping (``assign`` in search order)."""
        mapping = {self.order[p]: assign[p] for p in range(self.n1)}
        ids1, ids2 = self.ids1, self.ids2
        inv = {j: i for i, j in mapping.items() if j is not None}
        next_id = (max(ids1) + 1) if ids1 else 0
        fresh = {}
        for j in range(self.n2):
            if j not in inv:
                fresh[j] = next_id
                next_id += 1

        def work_id(j):
            return ids1[inv[j]] if j in inv else fresh[j]

        e_del, n_del, n_sub, n_ins, e_sub, e_ins = [], [], [], [], [], []
        for i in range(self.n1):
            for k in range(i + 1, self.n1):
                x = self.adj1[i][k]
                if not x:
                    continue
                ji, jk = mapping[i], mapping[k]
                y = 0 if ji is None or jk is None else self.adj2[ji][jk]
                if y == 0:
                    e_del.append(EditOp("edge-delete", ids1[i], ids1[k], old=_EDGE_NAME[x]))
                elif y != x:
                    e_sub.append(EditOp("edge-substitute", ids1[i], ids1[k], old=_EDGE_NAME[x], new=_EDGE_NAME[y]))
        for i in range(self.n1):
            j = mapping[i]
            if j is None:
                n_del.append(EditOp("node-delete", ids1[i], old=self.lab1[i]))
            elif self.lab1[i] != self.lab2[j]:
                n_sub.append(EditOp("node-substitute", ids1[i], old=self.lab1[i], new=self.lab2[j]))
        for j in range(self.n2):
            if j not in inv:
                n_ins.append(EditOp("node-insert", fresh[j], new=self.lab2[j]))
        for j in range(self.n2):
            for k in range(j + 1, self.n2):
                y = self.adj2[j][k]
                if not y:
                    continue
                if j in inv and k in inv and self.adj1[inv[j]][inv[k]]:
                    continue
                a, b = sorted((work_id(j), work_id(k)))
                e_ins.append(EditOp("edge-insert", a, b, new=_EDGE_NAME[y]))
        ops = tuple(e_del + n_del + n_sub + n_ins + e_sub + e_ins)
        c = self.costs
        weight = {
            "edge-delete": c.edge_del, "node-delete": c.node_del, "node-substitute": c.node_sub,
            "node-insert": c.node_ins, "edge-substitute": c.edge_sub, "edge-insert": c.edge_ins,
        }
        total = sum(weight[op.kind] for op in ops)
        node_map = tuple(
            (ids1[i], None if mapping[i] is None else ids2[mapping[i]]) for i in range(self.n1)
        )
        return EditPath(ops, total, node_map)


def _check_budget(g1, g2, budget):
    if max(g1.order, g2.order) > budget:
        raise BudgetExceeded(f"graph orders {g1.order} and {g2.order} exceed the exact budget of {budget}")


def root_lower_bound(g1: AccessGraph, g2: AccessGraph, costs: CostTable = UNIFORM) -> int:
    """Value of the A* heuristic before any node is mapped."""
    pair = _Pair(g1, g2, costs)
    return pair.heuristic(0, (), 0)


def ged_exact(
    g1: AccessGraph, g2: AccessGraph, budget: int = DEFAULT_BUDGET, costs: CostTable = UNIFORM
) -> tuple[int, EditPath]:
    """Minimum-cost edit path from ``g1`` to ``g2`` by A* over partial node mappings."""
    _check_budget(g1, g2, budget)
    pair = _Pair(g1, g2, costs)
    n1 = pair.n1
    if n1 == 0:
        path = pair.path_from(())
        return path.total_cost, path

    # incumbent from a greedy dive prunes the open list
    upper, _, best_assign = _dfs(pair, max_expansions=n1 + 1)
    seq = count()
    heap = [(pair.heuristic(0, (), 0), 0, next(seq), 0, (), 0)]
    while heap:
        f, negdepth, _, g, assign, used = heapq.heappop(heap)
        depth = -negdepth
        if depth == n1 + 1:
            best_assign = assign
            break
        if depth == n1:
            total = g + pair.completion_cost(used)
            if total <= upper:
                heapq.heappush(heap, (total, -(n1 + 1), next(seq), total, assign, used))
            continue
        for step, j in pair.children(depth, assign, used):
            g2_ = g + step
            if g2_ > upper:
                continue
            child_assign = assign + (j,)
            child_used = used if j is None else used | (1 << j)
            f2 = g2_ + pair.heuristic(depth + 1, child_assign, child_used)
            if f2 > upper:
                continue
            heapq.heappush(heap, (f2, -(depth + 1), next(seq), g2_, child_assign, child_used))
    path = pair.path_from(best_assign)
    return path.total_cost, path


def _dfs(pair: _Pair, max_expansions: int | None):
    """Depth-first branch and bound. Returns (cost, exhausted, assignment).

    Children are visited by increasing lower bound, ties by g2 index with
    deletion last, so the first leaf is the greedy solution and a larger
    budget only extends the same search.
    """
    n1 = pair.n1
    best = [None, None]
    expansions = [0]
    exhausted = [True]

    def visit(depth, assign, used, g):
        if depth == n1:
            total = g + pair.completion_cost(used)
            if best[0] is None or total < best[0]:
                best[0], best[1] = total, assign
            return
        if max_expansions is not None and expansions[0] >= max_expansions:
            exhausted[0] = False
            return
        expansions[0] += 1
        scored = []
        for rank, (step, j) in enumerate(pair.children(depth, assign, used)):
            child_assign = assign + (j,)
            child_used = used if j is None else used | (1 << j)
            h = pair.heuristic(depth + 1, child_assign, child_used)
            scored.append((g + step + h, rank, g + step, child_assign, child_used))
        scored.sort(key=lambda s: (s[0], s[1]))
        for f, _, g2_, child_assign, child_used in scored:
            if best[0] is not None and f >= best[0]:
                continue
            visit(depth + 1, child_assign, child_used, g2_)

    visit(0, (), 0, 0)
    return best[0], exhausted[0], best[1]


def ged_beam(
    g1: AccessGraph, g2: AccessGraph, beam_width: int = 64, costs: CostTable = UNIFORM
) -> tuple[int, EditPath]:
    """Upper bound on GED from a width-limited search.

    The search is the same depth-first branch and bound used to seed the
    exact solver, stopped after ``beam_width * (|N1| + 1)`` expansions. A
    wider search replays the narrower one and continues, so the bound never
    gets worse as the width grows; with enough width it is exact.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be at least 1")
    pair = _Pair(g1, g2, costs)
    if pair.n1 == 0:
        path = pair.path_from(())
        return path.total_cost, path
    _, _, assign = _dfs(pair, max_expansions=beam_width * (pair.n1 + 1))
    path = pair.path_from(assign)
    return path.total_cost, path


_clamp_lock = threading.Lock()
_clamp_events = 0


def clamp_events() -> int:
    """How many nged calls in this process hit the clamp at 1."""
    return _clamp_events


def nged_value(ged: int, order1: int, order2: int) -> float:
    global _clamp_events
    if order1 < 1 or order2 < 1:
        raise EmptyGraph("nGED is undefined for a graph without nodes")
    value = ged / (order1 * order2)
    if value > 1.0:
        with _clamp_lock:
            _clamp_events += 1
        log.debug("nGED %d/(%d*%d) clamped to 1", ged, order1, order2)
        return 1.0
    return value


def nged(g1: AccessGraph, g2: AccessGraph, budget: int = DEFAULT_BUDGET) -> float:
    """GED divided by the product of the graph orders, clamped to 1."""
    if g1.order < 1 or g2.order < 1:
        raise EmptyGraph("nGED is undefined for a graph without nodes")
    ged, _ = ged_exact(g1, g2, budget=budget)
    return nged_value(ged, g1.order, g2.order)


def apply_edit_path(g1: AccessGraph, path: EditPath) -> AccessGraph:
    """Replay ``path`` on ``g1``. Raises InvalidGraph-style errors on inconsistent paths."""
    labels = {n.id: n.room_type for n in g1.nodes}
    edges = dict(g1.edge_map())
    for op in path.operations:
        pair = None if op.b is None else (min(op.a, op.b), max(op.a, op.b))
        if op.kind == "edge-delete":
            if edges.pop(pair, None) != op.old:
                raise ValueError(f"cannot apply {op}")
        elif op.kind == "node-delete":
            if op.a not in labels or any(op.a in p for p in edges):
                raise ValueError(f"cannot apply {op}: node missing or still has edges")
            del labels[op.a]
        elif op.kind == "node-substitute":
            if labels.get(op.a) != op.old:
                raise ValueError(f"cannot apply {op}")
            labels[op.a] = op.new
        elif op.kind == "node-insert":
            if op.a in labels:
                raise ValueError(f"cannot apply {op}: id in use")
            labels[op.a] = op.new
        elif op.kind == "edge-substitute":
            if edges.get(pair) != op.old:
                raise ValueError(f"cannot apply {op}")
            edges[pair] = op.new
        elif op.kind == "edge-insert":
            if pair in edges or op.a not in labels or op.b not in labels:
                raise ValueError(f"cannot apply {op}")
            edges[pair] = op.new
        else:
            raise ValueError(f"unknown edit operation {op.kind!r}")
    nodes = tuple(Node(i, t) for i, t in labels.items())
    return AccessGraph(nodes, tuple(Edge(a, b, c) for (a, b), c in edges.items()))


def to_networkx(g: AccessGraph) -> nx.Graph:
    G = nx.Graph()
    for n in g.nodes:
        G.add_node(n.id, room_type=n.room_type)
    for e in g.edges:
        G.add_edge(e.a, e.b, connectivity=e.connectivity)
    return G


def is_isomorphic(g1: AccessGraph, g2: AccessGraph, attribute_aware: bool = True) -> bool:
    if g1.order != g2.order or len(g1.edges) != len(g2.edges):
        return False
    G1, G2 = to_networkx(g1), to_networkx(g2)
    if attribute_aware:
        gm = nxiso.GraphMatcher(
            G1, G2,
            node_match=nxiso.categorical_node_match("room_type", None),
            edge_match=nxiso.categorical_edge_match("connectivity", None),
        )
    else:
        gm = nxiso.GraphMatcher(G1, G2)
    return gm.is_isomorphic()


# -- canonical labeling -------------------------------------------------------


def _refine(colors: list[int], adj: list[list[tuple[int, int]]]) -> list[int]:
    """Colour refinement to a stable partition; colours are ranks, so cell order is preserved."""
    ncolors = len(set(colors))
    while True:
        sigs = [(colors[v], tuple(sorted((e, colors[w]) for w, e in adj[v]))) for v in range(len(colors))]
        uniq = sorted(set(sigs))
        if len(uniq) == ncolors:
            rank = {s: i for i, s in enumerate(uniq)}
            return [rank[s] for s in sigs]
        rank = {s: i for i, s in enumerate(uniq)}
        colors = [rank[s] for s in sigs]
        ncolors = len(uniq)


def _individualize(colors: list[int], v: int) -> list[int]:
    c = colors[v]
    return [2 * x + (1 if x == c and w != v else 0) for w, x in enumerate(colors)]


def _orbits(n, generators):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for perm in generators:
        for v, w in enumerate(perm):
            a, b = find(v), find(w)
            if a != b:
                parent[max(a, b)] = min(a, b)
    return find


def canonical_key(g: AccessGraph, attribute_aware: bool = True, budget: int = DEFAULT_BUDGET) -> str:
    """Text key equal for two graphs iff they are isomorphic.

    Individualization-refinement: the key is the smallest leaf encoding over
    the search tree, with branches pruned by automorphisms found on the way.
    """
    if g.order > budget:
        raise BudgetExceeded(f"graph order {g.order} exceeds the canonical key budget of {budget}")
    n = g.order
    ids = g.node_ids()
    pos = {nid: i for i, nid in enumerate(ids)}
    labels = [n_.room_type if attribute_aware else 0 for n_ in g.nodes]
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for e in g.edges:
        code = _EDGE_CODE[e.connectivity] if attribute_aware else 1
        adj[pos[e.a]].append((pos[e.b], code))
        adj[pos[e.b]].append((pos[e.a], code))

    def encode(colors):
        lab = [0] * n
        for v in range(n):
            lab[colors[v]] = labels[v]
        es = sorted(
            (min(colors[v], colors[w]), max(colors[v], colors[w]), c) for v in range(n) for w, c in adj[v] if v < w
        )
        return (tuple(lab), tuple(es))

    ranks = {lab: i for i, lab in enumerate(sorted(set(labels)))}
    start = _refine([ranks[lab] for lab in labels], adj)
    best = [None, None]
    autos: list[tuple[int, ...]] = []

    def search(colors, prefix):
        if len(set(colors)) == n:
            enc = encode(colors)
            if best[0] is None or enc < best[0]:
                best[0], best[1] = enc, colors
            elif enc == best[0]:
                inv = [0] * n
                for v, c in enumerate(best[1]):
                    inv[c] = v
                autos.append(tuple(inv[colors[v]] for v in range(n)))
            return
        sizes = Counter(colors)
        target = min(c for c, k in sizes.items() if k > 1)
        cell = [v for v in range(n) if colors[v] == target]
        done = []
        for v in cell:
            if done:
                gens = [a for a in autos if all(a[p] == p for p in prefix)]
                if gens:
                    find = _orbits(n, gens)
                    if any(find(v) == find(w) for w in done):
                        continue
            search(_refine(_individualize(colors, v), adj), prefix + [v])
            done.append(v)

    if n:
        search(start, [])
        lab, es = best[0]
    else:
        lab, es = (), ()
    edge_txt = ",".join(f"{a}-{b}:{_EDGE_NAME[c][0] if attribute_aware else 'e'}" for a, b, c in es)
    return f"{n}|{','.join(map(str, lab))}|{edge_txt}"

"""Score cache, mIoU prefiltering, SSIG re-ranking, deduplication and queries."""

from __future__ import annotations

import csv
import heapq
import json
import logging
import os
import threading
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import AccessGraph, CategoryMap, FloorPlan, MissingPairs, PairScore, pair_key
from .ged import DEFAULT_BUDGET, BudgetExceeded, canonical_key, ged_beam, ged_exact, nged_value
from .iou import CompactLabels
from .ssig import SsigParams, ssig

log = logging.getLogger(__name__)

CACHE_HEADER = ["id_a", "id_b", "miou", "ged", "nged", "ssig", "approx"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


class ScoreCache:
    """Pair scores keyed by canonical (id_a, id_b).

    With a ``path`` the cache is an append-only CSV: rows are only ever
    added, and on load later rows fill or override fields of earlier ones.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._records: dict[tuple[str, str], PairScore] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            self._load()

    def _load(self):
        with open(self.path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CACHE_HEADER:
                raise ValueError(f"{self.path} is not a score cache (header {reader.fieldnames})")
            for row in reader:
                rec = PairScore(
                    row["id_a"],
                    row["id_b"],
                    miou=float(row["miou"]) if row["miou"] else None,
                    ged=int(row["ged"]) if row["ged"] else None,
                    nged=float(row["nged"]) if row["nged"] else None,
                    ssig=float(row["ssig"]) if row["ssig"] else None,
                    approx=row["approx"] == "1",
                )
                self._merge(rec)

    def _merge(self, rec: PairScore) -> PairScore:
        old = self._records.get(rec.key)
        if old is not None:
            rec = PairScore(
                rec.id_a, rec.id_b,
                miou=rec.miou if rec.miou is not None else old.miou,
                ged=rec.ged if rec.ged is not None else old.ged,
                nged=rec.nged if rec.nged is not None else old.nged,
                ssig=rec.ssig if rec.ssig is not None else old.ssig,
                approx=rec.approx if rec.ged is not None else old.approx,
            )
        self._records[rec.key] = rec
        return rec

    def append(self, records: Iterable[PairScore]) -> int:
        records = list(records)
        if not records:
            return 0
        with self._lock:
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                new = not self.path.exists() or self.path.stat().st_size == 0
                with open(self.path, "a", newline="", encoding="utf-8") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    if new:
                        w.writerow(CACHE_HEADER)
                    for r in records:
                        w.writerow([r.id_a, r.id_b, _fmt(r.miou), _fmt(r.ged), _fmt(r.nged), _fmt(r.ssig), _fmt(r.approx)])
            for r in records:
                self._merge(r)
        return len(records)

    def get(self, a: str, b: str) -> PairScore | None:
        return self._records.get(pair_key(a, b))

    def miou(self, a: str, b: str) -> float:
        rec = self._records.get(pair_key(a, b))
        if rec is None or rec.miou is None:
            raise MissingPairs(f"no mIoU cached for ({a}, {b})")
        return rec.miou

    def __contains__(self, key) -> bool:
        return pair_key(*key) in self._records

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records.values())

    def records(self) -> list[PairScore]:
        return list(self._records.values())

    def ids(self) -> list[str]:
        out = set()
        for a, b in self._records:
            out.add(a)
            out.add(b)
        return sorted(out)


# -- stage 1: all-pairs mIoU ---------------------------------------------------

_worker_state: dict = {}


def _init_worker(ids, stack, categories_text, strict):
    _worker_state["ids"] = ids
    _worker_state["stack"] = stack
    _worker_state["enc"] = CompactLabels(CategoryMap.parse(categories_text), strict=strict)


def _miou_rows(rows: Sequence[int]) -> list[tuple[int, np.ndarray]]:
    stack = _worker_state["stack"]
    enc = _worker_state["enc"]
    return [(i, enc.one_to_many(stack[i], stack[i + 1:])) for i in rows]


def pairwise_miou(
    corpus: Sequence[FloorPlan],
    categories: CategoryMap,
    cache: ScoreCache | None = None,
    workers: int = 1,
    strict: bool = False,
) -> tuple[ScoreCache, list[tuple[str, str]]]:
    """mIoU for every unordered pair of the corpus, appended to ``cache``.

    Pairs already in the cache with an mIoU are not recomputed. Plans whose
    image shape differs from the majority are skipped pairwise and reported.
    """
    cache = cache if cache is not None else ScoreCache()
    plans = sorted(corpus, key=lambda p: p.id)
    skipped: list[tuple[str, str]] = []
    if len(plans) < 2:
        return cache, skipped

    shapes = {}
    for p in plans:
        shapes.setdefault(p.image.shape, []).append(p)
    groups = sorted(shapes.values(), key=len, reverse=True)
    for ga in range(len(groups)):
        for gb in range(ga + 1, len(groups)):
            for p in groups[ga]:
                for q in groups[gb]:
                    skipped.append(pair_key(p.id, q.id))
    if skipped:
        log.warning("%d pairs skipped: image dimensions differ", len(skipped))

    for group in groups:
        ids = [p.id for p in group]
        enc = CompactLabels(categories, strict=strict)
        stack = np.stack([enc.encode(p.image.labels) for p in group])
        todo = [i for i in range(len(ids) - 1)
                if any(pair_key(ids[i], ids[j]) not in cache or cache.get(ids[i], ids[j]).miou is None
                       for j in range(i + 1, len(ids)))]
        if not todo:
            continue
        if workers > 1 and len(todo) > 1:
            chunks = [todo[k::workers] for k in range(workers)]
            with ProcessPoolExecutor(
                max_workers=workers, initializer=_init_worker,
                initargs=(ids, stack, categories.dumps(), strict),
            ) as pool:
                results = [r for part in pool.map(_miou_rows, chunks) for r in part]
            results.sort(key=lambda r: r[0])
        else:
            _init_worker(ids, stack, categories.dumps(), strict)
            results = _miou_rows(todo)
        for i, values in results:
            batch = []
            for off, v in enumerate(values):
                j = i + 1 + off
                rec = cache.get(ids[i], ids[j])
                if rec is not None and rec.miou is not None:
                    continue
                if np.isnan(v):
                    skipped.append(pair_key(ids[i], ids[j]))
                    continue
                batch.append(PairScore(ids[i], ids[j], miou=float(v)))
            cache.append(batch)
    return cache, skipped


# -- stage 2: prefilter ----------------------------------------------------------


def prefilter_topn(cache: ScoreCache, n: int, ids: Iterable[str] | None = None) -> dict[str, list[tuple[str, float]]]:
    """The ``n`` best partners on mIoU for every identity (ties by candidate id)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    allowed = set(ids) if ids is not None else None
    partners: dict[str, list[tuple[float, str]]] = {}
    for rec in cache:
        if rec.miou is None:
            continue
        if allowed is not None and (rec.id_a not in allowed or rec.id_b not in allowed):
            continue
        partners.setdefault(rec.id_a, []).append((-rec.miou, rec.id_b))
        partners.setdefault(rec.id_b, []).append((-rec.miou, rec.id_a))
    if allowed is not None:
        for i in allowed:
            partners.setdefault(i, [])
    return {
        pid: [(cid, -neg) for neg, cid in heapq.nsmallest(n, lst)]
        for pid, lst in sorted(partners.items())
    }


# -- stage 3: SSIG re-ranking ------------------------------------------------------


@dataclass(frozen=True)
class RankEntry:
    candidate_id: str
    miou: float
    nged: float
    ssig: float
    ged: int
    approx: bool = False

    def sort_key(self):
        return (-self.ssig, self.nged, self.candidate_id)


@dataclass(frozen=True)
class RankedList:
    query_id: str
    entries: tuple[RankEntry, ...]

    def top(self, k: int) -> "RankedList":
        return RankedList(self.query_id, self.entries[:k])

    def ids(self) -> list[str]:
        return [e.candidate_id for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "query": self.query_id,
            "results": [
                {"id": e.candidate_id, "miou": e.miou, "nged": e.nged, "ssig": e.ssig, "approx": e.approx}
                for e in self.entries
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


class GedMemo:
    """GED per unordered pair of canonical graph keys. Safe for concurrent use."""

    def __init__(self, budget: int = DEFAULT_BUDGET, beam_width: int = 64):
        self.budget = budget
        self.beam_width = beam_width
        self._values: dict[tuple[str, str], tuple[int, bool]] = {}
        self._keys: dict[AccessGraph, str] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def key_of(self, g: AccessGraph) -> str:
        key = self._keys.get(g)
        if key is None:
            try:
                key = canonical_key(g, attribute_aware=True, budget=self.budget)
            except BudgetExceeded:
                key = "raw:" + json.dumps(g.to_dict()["edges"]) + json.dumps([n.room_type for n in g.nodes])
            with self._lock:
                self._keys[g] = key
        return key

    def lookup(self, g1: AccessGraph, g2: AccessGraph):
        k1, k2 = self.key_of(g1), self.key_of(g2)
        return (k1, k2) if k1 <= k2 else (k2, k1)

    def get(self, key):
        with self._lock:
            return self._values.get(key)

    def put(self, key, value):
        with self._lock:
            self._values[key] = value

    def solve(self, g1: AccessGraph, g2: AccessGraph) -> tuple[int, bool]:
        key = self.lookup(g1, g2)
        found = self.get(key)
        if found is not None:
            self.hits += 1
            return found
        self.misses += 1
        if self.key_of(g1) > self.key_of(g2):
            g1, g2 = g2, g1
        value = solve_ged(g1, g2, self.budget, self.beam_width)
        self.put(key, value)
        return value

    def __len__(self):
        return len(self._values)


def solve_ged(g1: AccessGraph, g2: AccessGraph, budget: int, beam_width: int) -> tuple[int, bool]:
    """Exact GED when within budget, else the width-limited bound flagged approximate."""
    try:
        return ged_exact(g1, g2, budget=budget)[0], False
    except BudgetExceeded:
        return ged_beam(g1, g2, beam_width=beam_width)[0], True


def _solve_task(task):
    g1, g2, budget, beam_width = task
    return solve_ged(g1, g2, budget, beam_width)


def score_pairs(
    pairs: Iterable[tuple[str, str]],
    plans: Mapping[str, FloorPlan],
    cache: ScoreCache,
    params: SsigParams,
    memo: GedMemo,
    workers: int = 1,
) -> dict[tuple[str, str], PairScore]:
    """Fill GED, nGED and SSIG for ``pairs`` (mIoU must be cached). Unsolved graph pairs fan out to workers."""
    pairs = sorted({pair_key(a, b) for a, b in pairs})
    pending: dict[tuple[str, str], tuple[AccessGraph, AccessGraph]] = {}
    for a, b in pairs:
        key = memo.lookup(plans[a].graph, plans[b].graph)
        if memo.get(key) is None and key not in pending:
            g1, g2 = plans[a].graph, plans[b].graph
            if memo.key_of(g1) > memo.key_of(g2):
                g1, g2 = g2, g1
            pending[key] = (g1, g2)
    if pending:
        keys = list(pending)
        tasks = [(*pending[k], memo.budget, memo.beam_width) for k in keys]
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                values = list(pool.map(_solve_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
        else:
            values = [_solve_task(t) for t in tasks]
        for k, v in zip(keys, values):
            memo.put(k, v)

    out = {}
    fresh = []
    for a, b in pairs:
        rec = cache.get(a, b)
        if rec is None or rec.miou is None:
            raise MissingPairs(f"no mIoU cached for ({a}, {b})")
        ged, approx = memo.solve(plans[a].graph, plans[b].graph)
        ng = nged_value(ged, plans[a].graph.order, plans[b].graph.order)
        s = ssig(rec.miou, ng, params)
        if rec.ged != ged or rec.nged != ng or rec.ssig != s or rec.approx != approx:
            fresh.append(PairScore(a, b, miou=None, ged=ged, nged=ng, ssig=s, approx=approx))
        out[(a, b)] = replace(rec, ged=ged, nged=ng, ssig=s, approx=approx)
    cache.append(fresh)
    return out


def _ranked(query_id: str, scored: Iterable[tuple[str, PairScore]]) -> RankedList:
    entries = [
        RankEntry(cid, rec.miou, rec.nged, rec.ssig, rec.ged, rec.approx) for cid, rec in scored
    ]
    entries.sort(key=RankEntry.sort_key)
    return RankedList(query_id, tuple(entries))


def rank_ssig(
    candidates: Mapping[str, Sequence[tuple[str, float]]],
    corpus: Sequence[FloorPlan] | Mapping[str, FloorPlan],
    cache: ScoreCache,
    params: SsigParams = SsigParams(),
    memo: GedMemo | None = None,
    workers: int = 1,
) -> dict[str, RankedList]:
    """SSIG for every surviving (identity, candidate) pair, each list sorted best first."""
    plans = corpus if isinstance(corpus, Mapping) else {p.id: p for p in corpus}
    memo = memo if memo is not None else GedMemo()
    for qid, cands in candidates.items():
        for cid, _ in cands:
            if cid not in plans or qid not in plans:
                raise KeyError(f"candidate pair ({qid}, {cid}) not in corpus")
    scores = score_pairs(
        ((q, c) for q, cands in candidates.items() for c, _ in cands), plans, cache, params, memo, workers
    )
    return {
        qid: _ranked(qid, ((cid, scores[pair_key(qid, cid)]) for cid, _ in cands))
        for qid, cands in sorted(candidates.items())
    }


def dedup(ids: Iterable[str], cache: ScoreCache, tau: float = 0.87) -> list[str]:
    """Greedy ascending-id sweep: drop an id whose mIoU with a kept id reaches ``tau``."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    kept: list[str] = []
    for pid in sorted(ids):
        if all(cache.miou(pid, k) < tau for k in kept):
            kept.append(pid)
    return kept


def query_plan(
    plan: FloorPlan,
    corpus: Sequence[FloorPlan],
    categories: CategoryMap,
    n: int = 50,
    top: int = 10,
    params: SsigParams = SsigParams(),
    memo: GedMemo | None = None,
    strict: bool = False,
) -> RankedList:
    """Rank an unseen plan against a corpus: mIoU to every plan, keep ``n``, re-rank on SSIG."""
    memo = memo if memo is not None else GedMemo()
    others = [p for p in corpus if p.id != plan.id and p.image.shape == plan.image.shape]
    if not others:
        return RankedList(plan.id, ())
    enc = CompactLabels(categories, strict=strict)
    values = enc.one_to_many(enc.encode(plan.image.labels), np.stack([enc.encode(p.image.labels) for p in others]))
    order = sorted((-v, p.id, k) for k, (p, v) in enumerate(zip(others, values)) if not np.isnan(v))[:n]
    entries = []
    for negm, pid, k in order:
        cand = others[k]
        ged, approx = memo.solve(plan.graph, cand.graph)
        ng = nged_value(ged, plan.graph.order, cand.graph.order)
        entries.append(RankEntry(pid, -negm, ng, ssig(-negm, ng, params), ged, approx))
    entries.sort(key=RankEntry.sort_key)
    return RankedList(plan.id, tuple(entries[:top]))


def default_workers(requested: int) -> int:
    return requested if requested > 0 else (os.cpu_count() or 1)

"""Corpus statistics: score distributions, originality, base graphs, IoU/GED agreement."""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import AccessGraph, FloorPlan, FpsimError, MissingPairs, PairScore
from .ged import DEFAULT_BUDGET, BudgetExceeded, canonical_key
from .ssig import EmptyInput


class DegenerateVariance(FpsimError):
    pass


class InsufficientStrictPairs(FpsimError):
    pass


def _bin_index(values: np.ndarray, bins: int, lo: float, hi: float) -> np.ndarray:
    idx = np.floor((values - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def histogram(values: Iterable[float], bins: int = 100, range: tuple[float, float] = (0.0, 1.0)) -> np.ndarray:
    """Probability mass per equal-width bin; out-of-range values land in the end bins."""
    lo, hi = range
    if bins < 1 or not hi > lo:
        raise ValueError(f"bad histogram spec: bins={bins}, range={range}")
    v = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if v.size == 0:
        raise EmptyInput("histogram of an empty sample")
    counts = np.bincount(_bin_index(v, bins, lo, hi), minlength=bins)
    return counts / v.size


def originality_iou(pid: str, cache, ids: Sequence[str] | None = None) -> float:
    """Mean mIoU of ``pid`` against every other plan; lower means more original."""
    others = [i for i in (ids if ids is not None else cache.ids()) if i != pid]
    if not others:
        raise MissingPairs(f"no other plans to compare {pid} with")
    return float(np.mean([cache.miou(pid, o) for o in others]))


@dataclass
class Census:
    """Plans grouped by base graph (isomorphism class)."""

    attribute_aware: bool
    groups: list[tuple[str, int]]
    assignment: dict[str, str]
    excluded: list[str] = field(default_factory=list)

    def graph_originality(self, pid: str) -> int:
        """Occurrence count of the plan's base graph; fewer means more original."""
        key = self.assignment[pid]
        return dict(self.groups)[key]


def base_graph_census(
    corpus: Sequence[FloorPlan] | Mapping[str, AccessGraph],
    attribute_aware: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> Census:
    graphs = corpus if isinstance(corpus, Mapping) else {p.id: p.graph for p in corpus}
    assignment, excluded = {}, []
    counts: dict[str, int] = defaultdict(int)
    for pid in sorted(graphs):
        try:
            key = canonical_key(graphs[pid], attribute_aware=attribute_aware, budget=budget)
        except BudgetExceeded:
            excluded.append(pid)
            continue
        assignment[pid] = key
        counts[key] += 1
    groups = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Census(attribute_aware, groups, assignment, excluded)


def _pairs(records: Iterable[PairScore]) -> tuple[np.ndarray, np.ndarray]:
    rows = [(r.miou, r.nged) for r in records if r.miou is not None and r.nged is not None]
    if not rows:
        return np.zeros(0), np.zeros(0)
    arr = np.array(rows, dtype=float)
    return arr[:, 0], arr[:, 1]


def correlation_iou_ged(records: Iterable[PairScore]) -> float:
    """Pearson correlation between mIoU and negative nGED."""
    m, g = _pairs(records)
    if m.size < 2:
        raise DegenerateVariance("need at least two scored pairs")
    x, y = m - m.mean(), -g - (-g).mean()
    sx, sy = np.sqrt(np.dot(x, x)), np.sqrt(np.dot(y, y))
    if sx == 0 or sy == 0:
        raise DegenerateVariance("mIoU or nGED is constant over the sample")
    return float(np.clip(np.dot(x, y) / (sx * sy), -1.0, 1.0))


def opposition_rate(records: Iterable[PairScore], sample_count: int = 1_000_000, seed: int = 0) -> float:
    """Share of record pairs where higher mIoU comes with higher nGED.

    Pairs tied on either score are left out of the denominator. When the
    number of distinct record pairs fits in ``sample_count`` every pair is
    used; otherwise ``sample_count`` ordered pairs are drawn uniformly.
    """
    m, g = _pairs(records)
    n = m.size
    if n < 2:
        raise InsufficientStrictPairs("need at least two scored pairs")
    if n * (n - 1) // 2 <= sample_count:
        i, j = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=sample_count)
        j = rng.integers(0, n - 1, size=sample_count)
        j = j + (j >= i)
    dm, dg = np.sign(m[i] - m[j]), np.sign(g[i] - g[j])
    strict = (dm != 0) & (dg != 0)
    total = int(strict.sum())
    if total == 0:
        raise InsufficientStrictPairs("every sampled pair is tied on mIoU or nGED")
    return int((dm[strict] == dg[strict]).sum()) / total


def density_map_2d(records: Iterable[PairScore], bins_x: int = 50, bins_y: int = 50) -> np.ndarray:
    """Joint mass over (mIoU bin, nGED bin) on [0, 1]^2."""
    m, g = _pairs(records)
    if m.size == 0:
        raise EmptyInput("density map of an empty sample")
    flat = _bin_index(m, bins_x, 0.0, 1.0) * bins_y + _bin_index(g, bins_y, 0.0, 1.0)
    counts = np.bincount(flat, minlength=bins_x * bins_y).reshape(bins_x, bins_y)
    return counts / m.size


def unique_ged_values(records: Iterable[PairScore]) -> int:
    return len({r.ged for r in records if r.ged is not None})


@dataclass
class SweepPoint:
    n: int
    pairs: int
    mean_miou: float
    mean_nged: float
    mean_ssig: float
    miou_hist: np.ndarray
    nged_hist: np.ndarray
    ssig_hist: np.ndarray


def topn_distribution_sweep(
    corpus: Sequence[FloorPlan],
    cache,
    n_values: Sequence[int],
    params=None,
    memo=None,
    bins: int = 20,
) -> list[SweepPoint]:
    """Score distributions among the pairs kept by the mIoU prefilter, for each ``n``.

    Each identity contributes its own top-``n`` list, so a pair kept by both
    of its plans counts twice, as it would in two ranked lists.
    """
    from .rank import GedMemo, prefilter_topn, score_pairs
    from .ssig import SsigParams

    if not n_values:
        raise ValueError("n_values must be non-empty")
    params = params or SsigParams()
    memo = memo if memo is not None else GedMemo()
    plans = {p.id: p for p in corpus}
    out = []
    for n in n_values:
        kept = prefilter_topn(cache, n, ids=plans)
        directed = [(q, c) for q, cands in kept.items() for c, _ in cands]
        scores = score_pairs(directed, plans, cache, params, memo)
        rows = [scores[(min(q, c), max(q, c))] for q, c in directed]
        mi = np.array([r.miou for r in rows])
        ng = np.array([r.nged for r in rows])
        ss = np.array([r.ssig for r in rows])
        out.append(SweepPoint(
            n, len(rows), float(mi.mean()), float(ng.mean()), float(ss.mean()),
            histogram(mi, bins), histogram(ng, bins), histogram(ss, bins),
        ))
    return out


def sample_pairs(ids: Sequence[str], sample_count: int = 1_000_000, seed: int = 0) -> list[tuple[str, str]]:
    """All unordered pairs of ``ids`` when they fit in ``sample_count``, else a seeded uniform sample."""
    ids = sorted(ids)
    n = len(ids)
    total = n * (n - 1) // 2
    if total <= sample_count:
        return [(ids[i], ids[j]) for i in range(n) for j in range(i + 1, n)]
    flat = np.sort(np.random.default_rng(seed).choice(total, size=sample_count, replace=False))
    out = []
    for k in flat.tolist():
        # invert the row-major upper-triangle index
        r = total - 1 - k
        t = (math.isqrt(8 * r + 1) - 1) // 2
        i = n - 2 - t
        j = k - (total - (t + 1) * (t + 2) // 2) + i + 1
        out.append((ids[i], ids[j]))
    return out


def _write_hist(path: Path, hist: np.ndarray):
    bins = len(hist)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "density"])
        for k, v in enumerate(hist):
            w.writerow([repr(k / bins), repr((k + 1) / bins), repr(float(v))])


def write_stats(
    out_dir: str | Path,
    records: Sequence[PairScore],
    census: Census | None = None,
    sample_count: int = 1_000_000,
    seed: int = 0,
    bins: int = 50,
) -> dict:
    """Write histogram, census and density CSVs plus ``summary.json``; return the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scored = [r for r in records if r.miou is not None and r.nged is not None]
    m, g = _pairs(scored)
    _write_hist(out / "iou_hist.csv", histogram(m, bins))
    _write_hist(out / "ged_hist.csv", histogram(g, bins))
    dens = density_map_2d(scored, bins, bins)
    with open(out / "density.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["miou_lo", "miou_hi", "nged_lo", "nged_hi", "mass"])
        for i in range(bins):
            for j in range(bins):
                if dens[i, j]:
                    w.writerow([repr(i / bins), repr((i + 1) / bins), repr(j / bins), repr((j + 1) / bins),
                                repr(float(dens[i, j]))])
    with open(out / "census.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "key", "count"])
        if census is not None:
            for rank, (key, cnt) in enumerate(census.groups, start=1):
                w.writerow([rank, key, cnt])

    def _safe(fn, *args, **kw):
        try:
            return fn(*args, **kw)
        except FpsimError:
            return None

    summary = {
        "pearson_r": _safe(correlation_iou_ged, scored),
        "opposition_rate": _safe(opposition_rate, scored, sample_count=sample_count, seed=seed),
        "sample_seed": seed,
        "sample_count": sample_count,
        "pairs": len(scored),
        "mean_miou": float(m.mean()),
        "mean_nged": float(g.mean()),
        "unique_ged_values": unique_ged_values(scored),
    }
    if census is not None:
        summary["census_attribute_aware"] = census.attribute_aware
        summary["base_graphs"] = len(census.groups)
        summary["census_excluded"] = len(census.excluded)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return summary

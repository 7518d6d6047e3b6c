"""Command-line entry point: configuration, dataset ingestion and the staged pipeline."""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import traceback
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import analysis
from .core import AccessGraph, CategoryMap, FloorPlan, FpsimError, NoRooms, SemanticImage, UnknownLabel, validate_floor_plan
from .extract import ExtractionParams, extract_access_graph
from .ged import BudgetExceeded, ged_beam, ged_exact, nged_value
from .rank import GedMemo, ScoreCache, dedup, default_workers, pairwise_miou, prefilter_topn, query_plan, rank_ssig
from .ssig import SsigParams, calibrate_gamma

log = logging.getLogger("fpsim")

MANIFEST_VERSION = 1


class UnreadableImage(FpsimError):
    pass


class ConfigError(FpsimError):
    pass


# -- configuration -----------------------------------------------------------------


@dataclass
class Config:
    dataset_dir: str = ""
    cache_dir: str = "fpsim-cache"
    category_map: str = ""  # empty: the bundled RPLAN-style map
    gamma: float = 0.4
    n: int = 50
    tau_dedup: float = 0.87
    ged_budget: int = 12
    beam_width: int = 64
    door_reach: int = 2
    adjacency_gap: int = 6
    min_room_area: int = 4
    seed: int = 0
    workers: int = 0  # 0: one per CPU
    stats_pairs: int = 1_000_000
    strict_miou: bool = False

    def validate(self, need_dataset: bool = False) -> "Config":
        checks = [
            (self.gamma > 0, "gamma must be positive"),
            (self.n >= 1, "n must be at least 1"),
            (0 < self.tau_dedup <= 1, "tau_dedup must lie in (0, 1]"),
            (self.ged_budget >= 1, "ged_budget must be at least 1"),
            (self.beam_width >= 1, "beam_width must be at least 1"),
            (self.door_reach >= 0, "door_reach must be non-negative"),
            (self.adjacency_gap >= 0, "adjacency_gap must be non-negative"),
            (self.min_room_area >= 1, "min_room_area must be at least 1"),
            (self.workers >= 0, "workers must be non-negative"),
            (self.stats_pairs >= 1, "stats_pairs must be at least 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        if self.category_map and not Path(self.category_map).is_file():
            raise ConfigError(f"category map {self.category_map} does not exist")
        if need_dataset and not Path(self.dataset_dir).is_dir():
            raise ConfigError(f"dataset_dir {self.dataset_dir!r} is not a directory")
        return self

    @property
    def cache(self) -> Path:
        return Path(self.cache_dir)

    def categories(self) -> CategoryMap:
        return CategoryMap.load(self.category_map) if self.category_map else CategoryMap.default()

    def extraction(self) -> ExtractionParams:
        return ExtractionParams(self.door_reach, self.adjacency_gap, self.min_room_area)

    def ssig_params(self) -> SsigParams:
        return SsigParams(self.gamma)


_FIELD_TYPES = {f.name: f.type for f in fields(Config)}


def _coerce(key: str, value: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind in ("int", int):
            return int(value)
        if kind in ("float", float):
            return float(value)
        if kind in ("bool", bool):
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def parse_config_text(text: str, base_dir: Path | None = None) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Relative paths resolve against ``base_dir``."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        if key in ("dataset_dir", "cache_dir", "category_map") and value and base_dir is not None:
            value = str((base_dir / value).resolve()) if not Path(value).is_absolute() else value
        values[key] = _coerce(key, value)
    return values


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> Config:
    """File values (``path`` or ``$FPSIM_CONFIG``), then non-None ``overrides`` on top."""
    values = {}
    path = path or os.environ.get("FPSIM_CONFIG")
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        values.update(parse_config_text(p.read_text(encoding="utf-8"), p.parent))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return Config(**values).validate()


# -- images -------------------------------------------------------------------------


def read_png(path: str | Path) -> SemanticImage:
    """8-bit single-channel image; the palette index (or gray level) is the category code."""
    try:
        with Image.open(path) as im:
            if im.mode not in ("P", "L"):
                raise UnreadableImage(f"{path}: mode {im.mode} is not 8-bit single-channel")
            return SemanticImage(np.array(im, dtype=np.uint8))
    except (OSError, UnidentifiedImageError) as exc:
        raise UnreadableImage(f"{path}: {exc}") from None


def _palette() -> list[int]:
    rng = np.random.default_rng(7)
    return rng.integers(40, 256, size=768).astype(int).tolist()


def write_png(path: str | Path, image: SemanticImage) -> None:
    im = Image.fromarray(np.asarray(image.labels))
    im.putpalette(_palette())  # turns the L image into P, indices unchanged
    im.save(path, format="PNG")


# -- stages ---------------------------------------------------------------------------


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part if isinstance(part, bytes) else json.dumps(part, sort_keys=True).encode())
        h.update(b"\0")
    return h.hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    tmp.replace(path)


def _dataset_files(dataset_dir: Path) -> list[Path]:
    return sorted(p for p in dataset_dir.iterdir() if p.is_file() and p.suffix.lower() == ".png")


def ingest(dataset_dir: str | Path, categories: CategoryMap, cache_dir: str | Path,
           params: ExtractionParams | None = None) -> dict:
    """Load every PNG, extract and validate it, write graphs of accepted plans and the manifest.

    Rejections (unreadable file, unknown label, no rooms, failed
    validation) are recorded with their reasons rather than raised. The
    manifest holds no timestamps, so re-running on the same inputs
    reproduces it byte for byte.
    """
    dataset_dir, cache_dir = Path(dataset_dir), Path(cache_dir)
    graphs_dir = cache_dir / "graphs"
    graphs_dir.mkdir(parents=True, exist_ok=True)
    accepted, rejected = [], []
    for path in _dataset_files(dataset_dir):
        pid = path.stem
        try:
            image = read_png(path)
            graph = extract_access_graph(image, categories, params)
            reasons = validate_floor_plan(FloorPlan(pid, image, graph), categories)
        except UnreadableImage as exc:
            reasons = [f"unreadable: {exc}"]
        except UnknownLabel as exc:
            reasons = [f"unknown-label: {exc}"]
        except NoRooms as exc:
            reasons = [f"no-rooms: {exc}"]
        if reasons:
            rejected.append({"id": pid, "reasons": reasons})
            stale = graphs_dir / f"{pid}.json"
            if stale.exists():
                stale.unlink()
            continue
        _write_text(graphs_dir / f"{pid}.json", graph.dumps() + "\n")
        accepted.append(pid)
    manifest = {
        "version": MANIFEST_VERSION,
        "accepted": accepted,
        "rejected": rejected,
        "extraction": dataclasses.asdict(params or ExtractionParams()),
    }
    _write_text(cache_dir / "manifest.json", json.dumps(manifest, indent=1) + "\n")
    return manifest


def load_manifest(cache_dir: str | Path) -> dict:
    path = Path(cache_dir) / "manifest.json"
    if not path.exists():
        raise FpsimError(f"{path} not found; run ingest first")
    return json.loads(path.read_text(encoding="utf-8"))


def load_corpus(config: Config, ids: Sequence[str] | None = None) -> list[FloorPlan]:
    manifest = load_manifest(config.cache)
    wanted = manifest["accepted"] if ids is None else ids
    out = []
    for pid in wanted:
        image = read_png(Path(config.dataset_dir) / f"{pid}.png")
        graph = AccessGraph.loads((config.cache / "graphs" / f"{pid}.json").read_text(encoding="utf-8"))
        out.append(FloorPlan(pid, image, graph))
    return out


def scores_path(config: Config) -> Path:
    return config.cache / "scores.csv"


def stage_pairwise(config: Config) -> int:
    corpus = load_corpus(config)
    cache = ScoreCache(scores_path(config))
    before = len(cache)
    _, skipped = pairwise_miou(corpus, config.categories(), cache, default_workers(config.workers), config.strict_miou)
    if skipped:
        log.warning("pairwise: %d pairs skipped", len(skipped))
    return len(cache) - before


def stage_dedup(config: Config) -> list[str]:
    ids = load_manifest(config.cache)["accepted"]
    retained = dedup(ids, ScoreCache(scores_path(config)), config.tau_dedup)
    doc = {"tau": config.tau_dedup, "retained": retained, "removed": sorted(set(ids) - set(retained))}
    _write_text(config.cache / "retained.json", json.dumps(doc, indent=1) + "\n")
    return retained


def retained_ids(config: Config) -> list[str]:
    path = config.cache / "retained.json"
    if path.exists():
        return json.loads(path.read_text(encoding="utf-8"))["retained"]
    return load_manifest(config.cache)["accepted"]


def _memo(config: Config) -> GedMemo:
    return GedMemo(config.ged_budget, config.beam_width)


def stage_rank(config: Config, memo: GedMemo | None = None) -> dict:
    ids = retained_ids(config)
    corpus = load_corpus(config, ids)
    cache = ScoreCache(scores_path(config))
    candidates = prefilter_topn(cache, config.n, ids=ids)
    ranked = rank_ssig(candidates, corpus, cache, config.ssig_params(), memo or _memo(config),
                       default_workers(config.workers))
    lines = "".join(ranked[q].dumps() + "\n" for q in sorted(ranked))
    _write_text(config.cache / "rankings.jsonl", lines)
    return ranked


def stage_stats(config: Config, out_dir: str | Path | None = None, memo: GedMemo | None = None) -> dict:
    """Score a seeded pair sample on GED too, then write the distribution files."""
    from .rank import score_pairs

    ids = retained_ids(config)
    corpus = load_corpus(config, ids)
    plans = {p.id: p for p in corpus}
    cache = ScoreCache(scores_path(config))
    pairs = [pr for pr in analysis.sample_pairs(ids, config.stats_pairs, config.seed)
             if cache.get(*pr) is not None and cache.get(*pr).miou is not None]
    scored = score_pairs(pairs, plans, cache, config.ssig_params(), memo or _memo(config),
                         default_workers(config.workers))
    census = analysis.base_graph_census(corpus, attribute_aware=True, budget=config.ged_budget)
    return analysis.write_stats(
        out_dir or config.cache / "stats", [scored[pr] for pr in sorted(scored)], census,
        sample_count=config.stats_pairs, seed=config.seed,
    )


# -- pipeline --------------------------------------------------------------------------


def _config_part(config: Config, *keys: str) -> dict:
    return {k: getattr(config, k) for k in keys}


def _stage_keys(config: Config) -> dict[str, str]:
    """Content hash of each stage's inputs, chained through upstream stages."""
    data = Path(config.dataset_dir)
    h = hashlib.sha256()
    for path in _dataset_files(data):
        h.update(path.name.encode() + b"\0" + hashlib.sha256(path.read_bytes()).digest())
    keys = {}
    keys["ingest"] = _digest(h.hexdigest(), config.categories().dumps(),
                             _config_part(config, "door_reach", "adjacency_gap", "min_room_area"))
    keys["pairwise"] = _digest(keys["ingest"], _config_part(config, "strict_miou"))
    keys["dedup"] = _digest(keys["pairwise"], _config_part(config, "tau_dedup"))
    keys["rank"] = _digest(keys["dedup"], _config_part(config, "n", "gamma", "ged_budget", "beam_width"))
    keys["stats"] = _digest(keys["dedup"], _config_part(config, "gamma", "ged_budget", "beam_width", "seed",
                                                         "stats_pairs"))
    return keys


_STAGE_OUTPUTS = {
    "ingest": ["manifest.json"],
    "pairwise": ["scores.csv"],
    "dedup": ["retained.json"],
    "rank": ["rankings.jsonl"],
    "stats": ["stats/summary.json"],
}


def run_pipeline(config: Config, force: bool = False) -> int:
    """ingest, pairwise, dedup, rank, stats. A stage is skipped when its input hash is unchanged.

    Failures are appended to ``<cache_dir>/errors.jsonl`` and give exit status 1.
    """
    config.validate(need_dataset=True)
    cache = config.cache
    cache.mkdir(parents=True, exist_ok=True)
    stamp_path = cache / "stamps.json"
    stamps = json.loads(stamp_path.read_text(encoding="utf-8")) if stamp_path.exists() else {}
    memo = _memo(config)
    actions: list[tuple[str, Callable[[], object]]] = [
        ("ingest", lambda: ingest(config.dataset_dir, config.categories(), cache, config.extraction())),
        ("pairwise", lambda: stage_pairwise(config)),
        ("dedup", lambda: stage_dedup(config)),
        ("rank", lambda: stage_rank(config, memo)),
        ("stats", lambda: stage_stats(config, memo=memo)),
    ]
    try:
        keys = _stage_keys(config)
    except (OSError, FpsimError, ValueError) as exc:
        _log_error(cache, "config", exc)
        return 1
    for name, action in actions:
        outputs_present = all((cache / out).exists() for out in _STAGE_OUTPUTS[name])
        if not force and stamps.get(name) == keys[name] and outputs_present:
            log.info("%s: up to date, skipped", name)
            continue
        if name == "pairwise" and stamps.get("ingest") != keys["ingest"] and scores_path(config).exists():
            scores_path(config).unlink()  # corpus changed: start the score cache afresh
        log.info("%s: running", name)
        try:
            action()
        except Exception as exc:  # noqa: BLE001 - every failure must reach errors.jsonl
            _log_error(cache, name, exc)
            stamps.pop(name, None)
            _write_text(stamp_path, json.dumps(stamps, indent=1, sort_keys=True) + "\n")
            return 1
        stamps[name] = keys[name]
        _write_text(stamp_path, json.dumps(stamps, indent=1, sort_keys=True) + "\n")
    return 0


def _log_error(cache: Path, stage: str, exc: BaseException) -> None:
    cache.mkdir(parents=True, exist_ok=True)
    record = {
        "stage": stage,
        "error": type(exc).__name__,
        "message": str(exc),
        "traceback": traceback.format_exception_only(type(exc), exc)[-1].strip(),
    }
    with open(cache / "errors.jsonl", "a", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(record) + "\n")
    log.error("%s failed: %s", stage, exc)


# -- argument parsing ------------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file (default: $FPSIM_CONFIG)")
    p.add_argument("--dataset-dir", dest="dataset_dir")
    p.add_argument("--cache-dir", dest="cache_dir")
    p.add_argument("--category-map", dest="category_map")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)


def _config_from(args, **extra) -> Config:
    overrides = {k: getattr(args, k, None) for k in ("dataset_dir", "cache_dir", "category_map", "workers", "seed")}
    overrides.update(extra)
    return load_config(getattr(args, "config", None), overrides)


def _graph_arg(path: str) -> AccessGraph:
    return AccessGraph.loads(Path(path).read_text(encoding="utf-8"))


def cmd_ingest(args) -> int:
    config = _config_from(args).validate(need_dataset=True)
    manifest = ingest(config.dataset_dir, config.categories(), config.cache, config.extraction())
    print(f"accepted {len(manifest['accepted'])}, rejected {len(manifest['rejected'])}")
    for rej in manifest["rejected"]:
        print(f"  {rej['id']}: {'; '.join(rej['reasons'])}")
    return 0


def cmd_extract(args) -> int:
    config = _config_from(args)
    graph = extract_access_graph(read_png(args.image), config.categories(), config.extraction())
    text = graph.dumps() + "\n"
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_pairwise(args) -> int:
    added = stage_pairwise(_config_from(args))
    print(f"{added} new pairs scored")
    return 0


def cmd_dedup(args) -> int:
    config = _config_from(args, tau_dedup=args.tau)
    retained = stage_dedup(config)
    print(f"retained {len(retained)} of {len(load_manifest(config.cache)['accepted'])}")
    return 0


def cmd_rank(args) -> int:
    config = _config_from(args, n=args.n, gamma=args.gamma, ged_budget=args.budget, beam_width=args.beam)
    ranked = stage_rank(config)
    print(f"ranked {len(ranked)} queries -> {config.cache / 'rankings.jsonl'}")
    return 0


def cmd_query(args) -> int:
    config = _config_from(args, n=args.n, gamma=args.gamma)
    corpus = load_corpus(config, retained_ids(config))
    target = Path(args.target)
    if target.suffix.lower() == ".png" and target.is_file():
        image = read_png(target)
        plan = FloorPlan(target.stem, image, extract_access_graph(image, config.categories(), config.extraction()))
    else:
        found = [p for p in corpus if p.id == args.target]
        if not found:
            found = load_corpus(config, [args.target])
        plan = found[0]
    ranked = query_plan(plan, corpus, config.categories(), n=config.n, top=args.top,
                        params=config.ssig_params(), memo=_memo(config), strict=config.strict_miou)
    print(json.dumps(ranked.to_dict(), indent=1))
    return 0


def cmd_stats(args) -> int:
    config = _config_from(args, stats_pairs=args.pairs)
    summary = stage_stats(config, args.out)
    print(json.dumps(summary, indent=1))
    return 0


def cmd_calibrate(args) -> int:
    records = [r for r in ScoreCache(args.pairs) if r.miou is not None and r.nged is not None]
    gamma, overlap = calibrate_gamma([r.miou for r in records], [r.nged for r in records], args.grid, args.bins)
    print(f"gamma_star {gamma:g}")
    print(f"overlap {overlap:.6f}")
    return 0


def cmd_ged(args) -> int:
    g1, g2 = _graph_arg(args.a), _graph_arg(args.b)
    approx = False
    if args.beam:
        cost, path = ged_beam(g1, g2, beam_width=args.beam)
        approx = True
    else:
        try:
            cost, path = ged_exact(g1, g2, budget=args.budget)
        except BudgetExceeded as exc:
            print(f"error: {exc}; pass --beam W for an upper bound", file=sys.stderr)
            return 2
    label = "upper bound" if approx else "cost"
    print(f"{label} {cost}")
    if g1.order and g2.order:
        print(f"nged {nged_value(cost, g1.order, g2.order)!r}")
    for op in path.operations:
        print(op)
    return 0


def cmd_run(args) -> int:
    config = _config_from(args)
    return run_pipeline(config, force=args.force)


def cmd_synth(args) -> int:
    from .synth import synthetic_images

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    images = synthetic_images(args.count, seed=args.seed, size=args.size)
    for pid, image in images:
        write_png(out / f"{pid}.png", image)
    print(f"wrote {len(images)} plans to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fpsim", description="Floor plan structural similarity")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="extract and validate every PNG in the dataset")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="print the access graph of one image")
    _add_config_flags(p)
    p.add_argument("image")
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("pairwise", help="mIoU for every pair of accepted plans")
    _add_config_flags(p)
    p.set_defaults(func=cmd_pairwise)

    p = sub.add_parser("dedup", help="drop near duplicates by mIoU threshold")
    _add_config_flags(p)
    p.add_argument("--tau", type=float)
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("rank", help="prefilter on mIoU, re-rank on SSIG")
    _add_config_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--budget", type=int)
    p.add_argument("--beam", type=int)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("query", help="rank the corpus against one plan id or PNG")
    _add_config_flags(p)
    p.add_argument("target")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=float)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("stats", help="distributions, census, correlation and opposition rate")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", type=int, help="pair sample budget")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("calibrate-gamma", help="fit gamma by histogram overlap")
    p.add_argument("--pairs", required=True, help="score cache CSV")
    p.add_argument("--grid", default="0.1:1.0:0.05")
    p.add_argument("--bins", type=int, default=100)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("ged", help="edit distance between two access-graph JSON files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--beam", type=int)
    p.add_argument("--budget", type=int, default=12)
    p.set_defaults(func=cmd_ged)

    p = sub.add_parser("run", help="the whole pipeline, skipping up-to-date stages")
    _add_config_flags(p)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="write a seeded synthetic corpus as PNGs")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=64)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except FpsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

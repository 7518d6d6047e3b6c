"""Seeded synthetic floor plans in the default (RPLAN-style) label scheme.

Plans come in families: one recursive-split template per family, rendered
several times with jittered wall positions, footprint and the occasional
room-type change. This mimics a corpus with many near duplicates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CategoryMap, FloorPlan, SemanticImage
from .extract import ExtractionParams, extract_access_graph

LIVING, MASTER, KITCHEN, BATH, DINING, CHILD, STUDY, SECOND, GUEST, BALCONY, ENTRANCE, STORAGE = range(12)
EXTERNAL, EXT_WALL, FRONT_DOOR, INT_WALL, INT_DOOR = 13, 14, 15, 16, 17

_ROOM_POOL = [MASTER, KITCHEN, BATH, SECOND, CHILD, BALCONY, DINING, STUDY, STORAGE, GUEST]
_ROOM_WEIGHTS = np.array([14, 14, 16, 10, 8, 10, 5, 5, 4, 3], dtype=float)
_MIN_SPAN = 5  # wall-to-wall distance; leaves 4 interior pixels


@dataclass
class _Split:
    axis: str  # "v": wall is a column, "h": wall is a row
    ratio: float
    first: object
    second: object


@dataclass
class Template:
    tree: object  # nested _Split with int leaves (room index)
    types: list[int]
    width: int
    height: int
    door_pairs: list[tuple[int, int]]
    door_offsets: dict


def _build_tree(rng, k, w, h, counter):
    if k == 1:
        idx = counter[0]
        counter[0] += 1
        return idx
    axis = "v" if (w > h if abs(w - h) > 4 else rng.random() < 0.5) else "h"
    k1 = int(rng.integers(1, k))
    ratio = float(np.clip(k1 / k + rng.normal(0, 0.06), 0.25, 0.75))
    span = w if axis == "v" else h
    a = max(int(span * ratio), 1)
    if axis == "v":
        return _Split(axis, ratio, _build_tree(rng, k1, a, h, counter), _build_tree(rng, k - k1, span - a, h, counter))
    return _Split(axis, ratio, _build_tree(rng, k1, w, a, counter), _build_tree(rng, k - k1, w, span - a, counter))


def _layout(node, rect, out, jitter, rng):
    """rect = (x0, y0, x1, y1) in wall coordinates; walls sit on those lines."""
    if isinstance(node, int):
        out[node] = rect
        return
    x0, y0, x1, y1 = rect
    ratio = node.ratio + (rng.normal(0, jitter) if jitter else 0.0)
    if node.axis == "v":
        c = int(round(x0 + ratio * (x1 - x0)))
        c = min(max(c, x0 + _MIN_SPAN), x1 - _MIN_SPAN)
        _layout(node.first, (x0, y0, c, y1), out, jitter, rng)
        _layout(node.second, (c, y0, x1, y1), out, jitter, rng)
    else:
        c = int(round(y0 + ratio * (y1 - y0)))
        c = min(max(c, y0 + _MIN_SPAN), y1 - _MIN_SPAN)
        _layout(node.first, (x0, y0, x1, c), out, jitter, rng)
        _layout(node.second, (x0, c, x1, y1), out, jitter, rng)


def _shared_walls(rects):
    """(i, j) -> (axis, wall coordinate, lo, hi) with lo..hi the shared interior span."""
    out = {}
    n = len(rects)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = rects[i], rects[j]
            for p, q in ((a, b), (b, a)):
                if p[2] == q[0]:
                    lo, hi = max(p[1], q[1]) + 1, min(p[3], q[3]) - 1
                    if hi - lo + 1 >= 3:
                        out[(i, j)] = ("v", p[2], lo, hi)
                if p[3] == q[1]:
                    lo, hi = max(p[0], q[0]) + 1, min(p[2], q[2]) - 1
                    if hi - lo + 1 >= 3:
                        out[(i, j)] = ("h", p[3], lo, hi)
    return out


def _door_tree(rng, k, walls, types):
    """Spanning tree over wall-sharing rooms, grown from the living room and biased towards it."""
    connected = {0}
    pairs = []
    while len(connected) < k:
        options = [(i, j) for (i, j) in walls if (i in connected) != (j in connected)]
        if not options:
            break
        weights = np.array([4.0 if 0 in pr else 1.0 for pr in options]) * np.array(
            [1.0 + (walls[pr][3] - walls[pr][2]) / 10 for pr in options]
        )
        pick = options[int(rng.choice(len(options), p=weights / weights.sum()))]
        pairs.append(pick)
        connected.update(pick)
    extra = [pr for pr in walls if pr not in pairs]
    for pr in extra:
        if rng.random() < 0.12:
            pairs.append(pr)
    return sorted(pairs)


def _rects_ok(rects) -> bool:
    return all(x1 - x0 >= _MIN_SPAN - 1 and y1 - y0 >= _MIN_SPAN - 1 for x0, y0, x1, y1 in rects)


def random_template(rng: np.random.Generator, size: int = 64) -> Template:
    while True:
        t = _random_template(rng, size)
        if t is not None:
            return t


def _random_template(rng, size):
    k = int(rng.choice([4, 5, 5, 6, 6, 7, 7, 8]))
    w = int(rng.integers(int(size * 0.7), size - 4))
    h = int(rng.integers(int(size * 0.7), size - 4))
    tree = _build_tree(rng, k, w, h, [0])
    types = [LIVING] + [int(t) for t in rng.choice(_ROOM_POOL, size=k - 1, p=_ROOM_WEIGHTS / _ROOM_WEIGHTS.sum())]
    rects = {}
    _layout(tree, (0, 0, w, h), rects, 0.0, rng)
    if not _rects_ok(rects.values()):
        return None
    walls = _shared_walls([rects[i] for i in range(k)])
    pairs = _door_tree(rng, k, walls, types)
    offsets = {pr: float(rng.uniform(0.3, 0.7)) for pr in walls}
    return Template(tree, types, w, h, pairs, offsets)


def render(template: Template, rng: np.random.Generator, size: int = 64, jitter: float = 0.0,
           type_flip: float = 0.0, drop_doors_of: int | None = None, wall: int = 2) -> SemanticImage:
    """Rasterize a template. Walls are ``wall`` pixels thick and end on the template's grid lines."""
    if not 1 <= wall < _MIN_SPAN - 2:
        raise ValueError(f"wall thickness {wall} out of range")
    k = len(template.types)
    dw = int(rng.integers(-2, 3)) if jitter else 0
    dh = int(rng.integers(-2, 3)) if jitter else 0
    w = int(np.clip(template.width + dw, 2 * _MIN_SPAN, size - 2))
    h = int(np.clip(template.height + dh, 2 * _MIN_SPAN, size - 2))
    ox = (size - w) // 2 + (int(rng.integers(-1, 2)) if jitter else 0)
    oy = (size - h) // 2 + (int(rng.integers(-1, 2)) if jitter else 0)
    ox = int(np.clip(ox, 0, size - w - 1))
    oy = int(np.clip(oy, 0, size - h - 1))
    rects = {}
    _layout(template.tree, (0, 0, w, h), rects, jitter, rng)
    rects = [rects[i] for i in range(k)]
    if not _rects_ok(rects):
        raise ValueError("jitter squeezed a room below the minimum size")

    types = list(template.types)
    if type_flip:
        for i in range(1, k):
            if rng.random() < type_flip:
                types[i] = int(rng.choice(_ROOM_POOL, p=_ROOM_WEIGHTS / _ROOM_WEIGHTS.sum()))

    img = np.full((size, size), EXTERNAL, dtype=np.uint8)
    img[oy:oy + h + 1, ox:ox + w + 1] = INT_WALL
    img[oy:oy + h + 1, ox:ox + w + 1][:wall, :] = EXT_WALL
    img[oy:oy + h + 1, ox:ox + w + 1][-wall:, :] = EXT_WALL
    img[oy:oy + h + 1, ox:ox + w + 1][:, :wall] = EXT_WALL
    img[oy:oy + h + 1, ox:ox + w + 1][:, -wall:] = EXT_WALL
    for i, (x0, y0, x1, y1) in enumerate(rects):
        # each room owns the wall on its right/bottom side; the outer ring is owned inward
        ix0 = wall if x0 == 0 else x0 + 1
        iy0 = wall if y0 == 0 else y0 + 1
        img[oy + iy0:oy + y1 - wall + 1, ox + ix0:ox + x1 - wall + 1] = types[i]

    walls = _shared_walls(rects)
    pairs = [pr for pr in template.door_pairs if pr in walls]
    # reconnect anything the jitter cut off
    parent = list(range(k))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for i, j in pairs:
        parent[find(i)] = find(j)
    for pr in sorted(walls, key=lambda p: -(walls[p][3] - walls[p][2])):
        if find(pr[0]) != find(pr[1]):
            parent[find(pr[0])] = find(pr[1])
            pairs.append(pr)
    if drop_doors_of is not None:
        pairs = [pr for pr in pairs if drop_doors_of not in pr]

    for pr in pairs:
        axis, c, lo, hi = walls[pr]
        lo, hi = (wall if lo == 1 else lo), hi - wall + 1
        span = hi - lo + 1
        length = min(3, span)
        frac = template.door_offsets.get(pr, 0.5)
        start = lo + int(round(frac * (span - length)))
        if axis == "v":
            img[oy + start:oy + start + length, ox + c - wall + 1:ox + c + 1] = INT_DOOR
        else:
            img[oy + c - wall + 1:oy + c + 1, ox + start:ox + start + length] = INT_DOOR

    x0, y0, x1, y1 = rects[0]
    if y0 == 0 and x1 - x0 >= 6:
        img[oy:oy + wall, ox + x0 + 2:ox + x0 + 5] = FRONT_DOOR
    elif x0 == 0 and y1 - y0 >= 6:
        img[oy + y0 + 2:oy + y0 + 5, ox:ox + wall] = FRONT_DOOR
    return SemanticImage(img)


def synthetic_images(n_plans: int = 200, seed: int = 0, size: int = 64,
                     family_sizes: tuple[int, int] = (11, 20)) -> list[tuple[str, SemanticImage]]:
    """``n_plans`` images grouped into families of near duplicates; ids ``syn0000``...

    The smallest family has 11 members, so every plan has at least ten near
    duplicates, like a dense real corpus at top-10 depth.
    """
    rng = np.random.default_rng(seed)
    categories = CategoryMap.default()
    out = []
    while len(out) < n_plans:
        template = random_template(rng, size)
        members = int(rng.integers(family_sizes[0], family_sizes[1] + 1))
        remaining = n_plans - len(out)
        if remaining - members < family_sizes[0]:
            members = remaining  # never leave a short trailing family
        family = []
        for _ in range(8 * members):
            if len(family) == members:
                break
            try:
                img = render(template, rng, size=size, jitter=0.03, type_flip=0.08)
            except ValueError:
                continue
            g = extract_access_graph(img, categories)
            if g.order == len(template.types) and g.door_connected():
                family.append(img)
        if len(family) < members:
            continue  # template too fragile under jitter; draw another
        base = len(out)
        out.extend([(f"syn{base + i:04d}", img) for i, img in enumerate(family)])
    return out


def synthetic_corpus(n_plans: int = 200, seed: int = 0, size: int = 64,
                     categories: CategoryMap | None = None,
                     params: ExtractionParams | None = None) -> list[FloorPlan]:
    categories = categories or CategoryMap.default()
    return [
        FloorPlan(pid, img, extract_access_graph(img, categories, params))
        for pid, img in synthetic_images(n_plans, seed, size)
    ]

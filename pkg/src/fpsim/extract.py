"""Access graph extraction from semantic images.

Rooms are maximal 4-connected regions of one area category. Two rooms get a
``door`` edge when some opening component lies within ``door_reach`` pixels
(Chebyshev) of both, and an ``adjacent`` edge when, lacking a door, their
boundaries come within ``adjacency_gap`` pixels of each other through
non-room pixels.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import ndimage

from .core import AccessGraph, CategoryMap, Edge, Node, NoRooms, SemanticImage, UnknownLabel

_FOUR = ndimage.generate_binary_structure(2, 1)
_EIGHT = ndimage.generate_binary_structure(2, 2)


@dataclass(frozen=True)
class Component:
    id: int
    code: int
    size: int
    bbox: tuple[int, int, int, int]  # row0, col0, row1, col1 (exclusive ends)


@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    ids: np.ndarray  # per pixel, 0 = no component
    components: tuple[Component, ...]

    def __len__(self):
        return len(self.components)


@dataclass(frozen=True)
class ExtractionParams:
    door_reach: int = 2
    adjacency_gap: int = 6
    min_room_area: int = 4

    def __post_init__(self):
        if self.door_reach < 0 or self.adjacency_gap < 0 or self.min_room_area < 1:
            raise ValueError(f"invalid extraction parameters: {self}")


def _check_labels(image: SemanticImage, categories: CategoryMap) -> None:
    for v in np.unique(image.labels):
        if int(v) not in categories:
            raise UnknownLabel(f"label {int(v)} is not in the category map")


def label_components(image: SemanticImage, roles, categories: CategoryMap) -> ComponentLabeling:
    """4-connected components over pixels whose category role is in ``roles``.

    Component ids are dense from 1 in raster-scan order of each component's
    first pixel.
    """
    roles = set(roles)
    if not roles:
        raise ValueError("roles must be non-empty")
    _check_labels(image, categories)
    labels = image.labels
    raw = np.zeros(labels.shape, dtype=np.int32)
    codes = {}
    offset = 0
    for code in categories.codes_with_role(*roles):
        mask = labels == code
        if not mask.any():
            continue
        lab, n = ndimage.label(mask, structure=_FOUR)
        raw[mask] = lab[mask] + offset
        for k in range(1, n + 1):
            codes[offset + k] = code
        offset += n
    if offset == 0:
        return ComponentLabeling(np.zeros(labels.shape, dtype=np.int32), ())

    flat = raw.ravel()
    uniq, first = np.unique(flat, return_index=True)
    keep = uniq != 0
    uniq, first = uniq[keep], first[keep]
    order = uniq[np.argsort(first, kind="stable")]
    remap = np.zeros(offset + 1, dtype=np.int32)
    remap[order] = np.arange(1, len(order) + 1, dtype=np.int32)
    ids = remap[raw]

    sizes = np.bincount(ids.ravel(), minlength=len(order) + 1)
    slices = ndimage.find_objects(ids)
    comps = []
    for new_id, old in enumerate(order, start=1):
        rs, cs = slices[new_id - 1]
        comps.append(Component(new_id, codes[int(old)], int(sizes[new_id]), (rs.start, cs.start, rs.stop, cs.stop)))
    ids.setflags(write=False)
    return ComponentLabeling(ids, tuple(comps))


def _window(bbox, pad, shape):
    r0, c0, r1, c1 = bbox
    return (slice(max(r0 - pad, 0), min(r1 + pad, shape[0])), slice(max(c0 - pad, 0), min(c1 + pad, shape[1])))


def _door_pairs(rooms: np.ndarray, openings: ComponentLabeling, reach: int) -> set[tuple[int, int]]:
    pairs = set()
    square = np.ones((2 * reach + 1, 2 * reach + 1), dtype=bool)
    for comp in openings.components:
        win = _window(comp.bbox, reach, rooms.shape)
        mask = openings.ids[win] == comp.id
        if reach:
            mask = ndimage.binary_dilation(mask, structure=square)
        touched = np.unique(rooms[win][mask])
        touched = [int(t) for t in touched if t >= 0]
        pairs.update(combinations(sorted(touched), 2))
    return pairs


def _adjacent_pairs(rooms: np.ndarray, bboxes: list, gap: int) -> set[tuple[int, int]]:
    if gap == 0:
        return set()
    pairs = set()
    passable = rooms < 0
    for idx, bbox in enumerate(bboxes):
        win = _window(bbox, gap + 1, rooms.shape)
        sub = rooms[win]
        grown = sub == idx
        if gap > 1:
            grown = ndimage.binary_dilation(grown, structure=_EIGHT, iterations=gap - 1, mask=passable[win] | grown)
        reach = ndimage.binary_dilation(grown, structure=_EIGHT)
        for t in np.unique(sub[reach]):
            t = int(t)
            if t >= 0 and t != idx:
                pairs.add((min(idx, t), max(idx, t)))
    return pairs


def extract_access_graph(
    image: SemanticImage, categories: CategoryMap, params: ExtractionParams | None = None
) -> AccessGraph:
    params = params or ExtractionParams()
    areas = label_components(image, {"area"}, categories)
    kept = [c for c in areas.components if c.size >= params.min_room_area]
    if not kept:
        raise NoRooms("image has no area component of at least min_room_area pixels")

    # room index per pixel, -1 for walls, openings, background and discarded specks
    lut = np.full(len(areas.components) + 1, -1, dtype=np.int32)
    for idx, c in enumerate(kept):
        lut[c.id] = idx
    rooms = lut[areas.ids]

    openings = label_components(image, {"opening"}, categories)
    doors = _door_pairs(rooms, openings, params.door_reach)
    adjacent = _adjacent_pairs(rooms, [c.bbox for c in kept], params.adjacency_gap) - doors

    nodes = tuple(Node(idx, c.code, c.size) for idx, c in enumerate(kept))
    edges = [Edge(a, b, "door") for a, b in doors] + [Edge(a, b, "adjacent") for a, b in adjacent]
    return AccessGraph(nodes, tuple(edges))

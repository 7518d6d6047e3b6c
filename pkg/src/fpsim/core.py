"""Domain types shared across the package, plus floor plan validation."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

ROLES = ("area", "opening", "separator", "background")
CONNECTIVITY = ("door", "adjacent")


class FpsimError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(FpsimError):
    pass


class UnknownLabel(FpsimError):
    pass


class NoRooms(FpsimError):
    pass


class InvalidGraph(FpsimError):
    pass


class MissingPairs(FpsimError):
    pass


@dataclass(frozen=True)
class Category:
    code: int
    name: str
    role: str


@dataclass(frozen=True)
class CategoryMap:
    """Label codes with names and roles.

    Files are CSV lines ``code,name,role``; ``#`` starts a comment.
    """

    entries: tuple[Category, ...]

    def __post_init__(self):
        codes = [c.code for c in self.entries]
        if len(set(codes)) != len(codes):
            raise ValueError("category codes must be unique")
        for c in self.entries:
            if c.role not in ROLES:
                raise ValueError(f"unknown role {c.role!r} for code {c.code}")
            if not 0 <= c.code <= 255:
                raise ValueError(f"category code {c.code} does not fit in 8 bits")
        if sum(c.role == "background" for c in self.entries) != 1:
            raise ValueError("exactly one background category is required")
        if not self.codes_with_role("area"):
            raise ValueError("at least one area category is required")
        if not self.codes_with_role("opening"):
            raise ValueError("at least one opening category is required")

    @classmethod
    def parse(cls, text: str) -> "CategoryMap":
        lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        rows = csv.reader(ln for ln in lines if ln)
        return cls(tuple(Category(int(code), name.strip(), role.strip()) for code, name, role in rows))

    @classmethod
    def load(cls, path: str | Path) -> "CategoryMap":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def default(cls) -> "CategoryMap":
        text = resources.files("fpsim.data").joinpath("rplan_categories.csv").read_text(encoding="utf-8")
        return cls.parse(text)

    def dumps(self) -> str:
        out = io.StringIO()
        out.write("# code,name,role\n")
        for c in self.entries:
            out.write(f"{c.code},{c.name},{c.role}\n")
        return out.getvalue()

    @property
    def background(self) -> int:
        return next(c.code for c in self.entries if c.role == "background")

    def codes_with_role(self, *roles: str) -> tuple[int, ...]:
        return tuple(c.code for c in self.entries if c.role in roles)

    def role_of(self, code: int) -> str:
        for c in self.entries:
            if c.code == code:
                return c.role
        raise UnknownLabel(f"label {code} is not in the category map")

    def name_of(self, code: int) -> str:
        for c in self.entries:
            if c.code == code:
                return c.name
        raise UnknownLabel(f"label {code} is not in the category map")

    def __contains__(self, code: int) -> bool:
        return any(c.code == code for c in self.entries)


@dataclass(frozen=True, eq=False)
class SemanticImage:
    """H x W raster of category codes. The array is made read-only."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.labels, dtype=np.uint8, copy=True)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError(f"semantic image must be a non-empty 2-D array, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def __eq__(self, other):
        if not isinstance(other, SemanticImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.labels, other.labels))

    def __hash__(self):
        return hash((self.shape, self.labels.tobytes()))


@dataclass(frozen=True, order=True)
class Node:
    id: int
    room_type: int
    pixel_area: int = 0


@dataclass(frozen=True, order=True)
class Edge:
    a: int
    b: int
    connectivity: str = "door"

    def __post_init__(self):
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @property
    def pair(self) -> tuple[int, int]:
        return (self.a, self.b)


@dataclass(frozen=True)
class AccessGraph:
    """Rooms as nodes, ``door``/``adjacent`` relations as edges.

    Construction checks the structural invariants (unique ids, no self
    loops, no parallel edges, known connectivity). Door-connectivity is a
    cleaning rule and is reported by :func:`validate_floor_plan` instead.
    """

    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        nodes = tuple(sorted(self.nodes))
        edges = tuple(sorted(self.edges))
        ids = [n.id for n in nodes]
        if len(set(ids)) != len(ids):
            raise InvalidGraph("node ids must be unique")
        known = set(ids)
        seen = set()
        for e in edges:
            if e.connectivity not in CONNECTIVITY:
                raise InvalidGraph(f"edge {e.pair} has connectivity {e.connectivity!r}")
            if e.a == e.b:
                raise InvalidGraph(f"self-loop on node {e.a}")
            if e.a not in known or e.b not in known:
                raise InvalidGraph(f"edge {e.pair} references a missing node")
            if e.pair in seen:
                raise InvalidGraph(f"more than one edge between {e.a} and {e.b}")
            seen.add(e.pair)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    @property
    def order(self) -> int:
        return len(self.nodes)

    def node_ids(self) -> list[int]:
        return [n.id for n in self.nodes]

    def labels(self) -> dict[int, int]:
        return {n.id: n.room_type for n in self.nodes}

    def edge_map(self) -> dict[tuple[int, int], str]:
        return {e.pair: e.connectivity for e in self.edges}

    def neighbors(self, connectivity: str | None = None) -> dict[int, set[int]]:
        adj = {n.id: set() for n in self.nodes}
        for e in self.edges:
            if connectivity is None or e.connectivity == connectivity:
                adj[e.a].add(e.b)
                adj[e.b].add(e.a)
        return adj

    def door_connected(self) -> bool:
        if not self.nodes:
            return False
        adj = self.neighbors("door")
        start = self.nodes[0].id
        seen = {start}
        stack = [start]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(self.nodes)

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "room_type": n.room_type, "pixel_area": n.pixel_area} for n in self.nodes],
            "edges": [{"a": e.a, "b": e.b, "connectivity": e.connectivity} for e in self.edges],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AccessGraph":
        nodes = tuple(Node(int(n["id"]), int(n["room_type"]), int(n.get("pixel_area", 0))) for n in doc["nodes"])
        edges = tuple(Edge(int(e["a"]), int(e["b"]), str(e["connectivity"])) for e in doc.get("edges", []))
        return cls(nodes, edges)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "AccessGraph":
        return cls.from_dict(json.loads(text))

    @classmethod
    def build(cls, room_types: Iterable[int], edges: Iterable[tuple] = ()) -> "AccessGraph":
        """Convenience constructor: node ids are positions in ``room_types``.

        Edges are ``(a, b)`` (a door) or ``(a, b, connectivity)``.
        """
        nodes = tuple(Node(i, int(t)) for i, t in enumerate(room_types))
        es = tuple(Edge(e[0], e[1], e[2] if len(e) > 2 else "door") for e in edges)
        return cls(nodes, es)


@dataclass(frozen=True)
class FloorPlan:
    id: str
    image: SemanticImage
    graph: AccessGraph


@dataclass(frozen=True)
class PairScore:
    """One row of the score cache. ``None`` marks a stage not yet computed."""

    id_a: str
    id_b: str
    miou: float | None = None
    ged: int | None = None
    nged: float | None = None
    ssig: float | None = None
    approx: bool = False

    def __post_init__(self):
        if self.id_a > self.id_b:
            a, b = self.id_b, self.id_a
            object.__setattr__(self, "id_a", a)
            object.__setattr__(self, "id_b", b)

    @property
    def key(self) -> tuple[str, str]:
        return (self.id_a, self.id_b)


def pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def _image_violations(image: SemanticImage, categories: CategoryMap) -> Iterator[str]:
    present = np.unique(image.labels)
    unknown = [int(v) for v in present if int(v) not in categories]
    if unknown:
        yield f"unknown-label: image uses codes {unknown} absent from the category map"
    area = set(categories.codes_with_role("area"))
    if not any(int(v) in area for v in present):
        yield "no-rooms: no pixel carries an area-role label"


def validate_floor_plan(plan: FloorPlan, categories: CategoryMap) -> list[str]:
    """Return every violated invariant as a short description; empty means valid."""
    report = list(_image_violations(plan.image, categories))
    g = plan.graph
    if g.order == 0:
        report.append("no-rooms: access graph has no nodes")
    else:
        area = set(categories.codes_with_role("area"))
        present = {int(v) for v in np.unique(plan.image.labels)}
        for n in g.nodes:
            if n.room_type not in area:
                report.append(f"node-type: node {n.id} has non-area room type {n.room_type}")
            elif n.room_type not in present:
                report.append(f"node-type: node {n.id} room type {n.room_type} does not appear in the image")
        if not g.door_connected():
            adj = g.neighbors("door")
            root = g.nodes[0].id
            seen, stack = {root}, [root]
            while stack:
                for nb in adj[stack.pop()]:
                    if nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
            cut = sorted(set(g.node_ids()) - seen)
            report.append(f"door-connectivity: rooms {cut} are not reachable from room {root} through doors")
    return report

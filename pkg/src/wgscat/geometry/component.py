"""Polygonal circuit components with tagged wall and port segments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely
import shapely.geometry

from ..modal import DIRICHLET, PortSpec

WALL = "wall"
PORT = "port"
RIGHT_ANGLE_TOL = 1e-10


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    start: tuple
    end: tuple
    kind: str = WALL
    name: str | None = None

    @property
    def length(self) -> float:
        return float(np.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1]))


@dataclass
class ComponentGeometry:
    """Closed counterclockwise polygon whose edges are walls or ports.

    The vertex list holds the outer ring first and then any holes, each hole
    listed clockwise; ``rings`` gives the vertex count of every ring (one
    entry for a simply connected component).  Segment ``i`` joins vertex
    ``i`` to the next vertex of the same ring.  Holes carry walls only.

    Ports are numbered in boundary order starting from vertex 0.  Each port's
    frame has ``tangent`` along the counterclockwise edge direction and
    ``axis`` equal to the outward normal, so two components sharing an edge
    see opposite transverse coordinates.
    """

    vertices: np.ndarray
    kinds: list
    names: list
    bc: str = DIRICHLET
    k: float = 1.0
    rings: tuple | None = None
    angles: np.ndarray = field(init=False)
    port_segments: list = field(init=False)
    ports: list = field(init=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        n = len(self.vertices)
        self.rings = (n,) if self.rings is None else tuple(int(r) for r in self.rings)
        if sum(self.rings) != n or min(self.rings) < 3:
            raise GeometryError("ring sizes must be at least 3 and add up to the vertex count")
        first = np.repeat(np.cumsum((0,) + self.rings[:-1]), self.rings)
        size = np.repeat(self.rings, self.rings)
        idx = np.arange(n)
        self._next = first + (idx - first + 1) % size
        self._prev = first + (idx - first - 1) % size
        self.angles = np.array([_interior_angle(self.vertices[self._prev[i]], self.vertices[i],
                                                self.vertices[self._next[i]]) for i in range(n)])
        self.port_segments = [i for i, kd in enumerate(self.kinds) if kd == PORT]
        self.ports = [self._port_spec(i) for i in self.port_segments]

    # -- geometry helpers -------------------------------------------------
    @property
    def n_segments(self) -> int:
        return len(self.vertices)

    @property
    def n_holes(self) -> int:
        return len(self.rings) - 1

    def next_vertex(self, i: int) -> int:
        """Following vertex (and segment) on the same ring."""
        return int(self._next[i])

    def prev_vertex(self, i: int) -> int:
        return int(self._prev[i])

    def ring_ranges(self) -> list:
        ends = np.cumsum(self.rings)
        return [range(e - r, e) for r, e in zip(self.rings, ends)]

    def segment(self, i: int) -> Segment:
        a = self.vertices[i]
        b = self.vertices[self._next[i]]
        return Segment(tuple(a), tuple(b), self.kinds[i], self.names[i])

    def segment_length(self, i: int) -> float:
        return self.segment(i).length

    def port_names(self) -> list:
        return [self.names[i] for i in self.port_segments]

    def port_index(self, name) -> int:
        for j, i in enumerate(self.port_segments):
            if self.names[i] == name:
                return j
        raise KeyError(name)

    def polygon(self) -> shapely.geometry.Polygon:
        rr = self.ring_ranges()
        return shapely.geometry.Polygon(self.vertices[list(rr[0])], [self.vertices[list(r)] for r in rr[1:]])

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        return shapely.contains_xy(self.polygon(), pts[:, 0], pts[:, 1])

    def perimeter(self) -> float:
        return float(sum(self.segment_length(i) for i in range(self.n_segments)))

    def flanking_walls(self, port_seg: int) -> tuple:
        return self.prev_vertex(port_seg), self.next_vertex(port_seg)

    def straight_length(self, port: int) -> float:
        """Length the channel continues straight into the component behind port ``port``."""
        s = self.port_segments[port]
        before, after = self.flanking_walls(s)
        return min(self.segment_length(before), self.segment_length(after))

    def _port_spec(self, i: int) -> PortSpec:
        seg = self.segment(i)
        a = np.asarray(seg.start)
        b = np.asarray(seg.end)
        t = (b - a) / seg.length
        axis = np.array([t[1], -t[0]])
        return PortSpec(seg.length, self.bc, self.k, tuple(0.5 * (a + b)), tuple(t), tuple(axis))

    def with_physics(self, bc: str, k: float) -> "ComponentGeometry":
        return ComponentGeometry(self.vertices.copy(), list(self.kinds), list(self.names), bc, k, self.rings)


def _interior_angle(prev: np.ndarray, here: np.ndarray, nxt: np.ndarray) -> float:
    """Angle on the domain side (left of travel) at ``here``."""
    e_in = here - prev
    e_out = nxt - here
    turn = math.atan2(e_in[0] * e_out[1] - e_in[1] * e_out[0], e_in @ e_out)
    return math.pi - turn


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def build_component(segments, bc: str = DIRICHLET, k: float = 1.0, close_tol: float = 1e-12,
                    holes=()) -> ComponentGeometry:
    """Validate a closed tagged polyline and return a :class:`ComponentGeometry`.

    ``segments`` is a sequence of ``(start, end, kind)`` or
    ``(start, end, kind, name)`` tuples (or :class:`Segment` objects) listed
    in boundary order.  Clockwise input is reversed.  ``holes`` is a sequence
    of vertex lists, one per hole; their edges are walls.
    """
    segs = [s if isinstance(s, Segment) else Segment(tuple(s[0]), tuple(s[1]), *s[2:]) for s in segments]
    if len(segs) < 3:
        raise GeometryError("a component needs at least three segments")
    for s in segs:
        if s.kind not in (WALL, PORT):
            raise GeometryError(f"unknown segment kind {s.kind!r}")
        if s.length <= close_tol:
            raise GeometryError("degenerate zero-length segment")
    for s, t in zip(segs, segs[1:] + segs[:1]):
        if np.hypot(s.end[0] - t.start[0], s.end[1] - t.start[1]) > close_tol * max(1.0, s.length):
            raise GeometryError("polyline is not closed")

    verts = np.array([s.start for s in segs], dtype=float)
    kinds = [s.kind for s in segs]
    names = [s.name if s.name is not None else (f"p{j}" if s.kind == PORT else None) for j, s in enumerate(segs)]
    if not shapely.geometry.LinearRing(verts).is_simple:
        raise GeometryError("polyline is not simple")
    if _signed_area(verts) < 0:
        # walk the boundary backwards: new segment i is old segment n-1-i reversed
        verts = np.array([s.end for s in reversed(segs)], dtype=float)
        kinds = kinds[::-1]
        names = names[::-1]

    rings = [len(verts)]
    if len(holes):
        outer = shapely.geometry.Polygon(verts)
        hole_rings = []
        for h in holes:
            hv = np.asarray(h, dtype=float)
            if len(hv) < 3 or not shapely.geometry.LinearRing(hv).is_simple:
                raise GeometryError("hole boundary is not a simple polygon")
            if _signed_area(hv) > 0:
                hv = hv[::-1]
            hole_rings.append(hv)
        poly = shapely.geometry.Polygon(verts, hole_rings)
        if not poly.is_valid or abs(poly.area - outer.area + sum(abs(_signed_area(h)) for h in hole_rings)) > 1e-9:
            raise GeometryError("holes must lie strictly inside the outer boundary and not overlap")
        for hv in hole_rings:
            verts = np.vstack([verts, hv])
            kinds += [WALL] * len(hv)
            names += [None] * len(hv)
            rings.append(len(hv))

    comp = ComponentGeometry(verts, kinds, names, bc, k, tuple(rings))
    for i in comp.port_segments:
        for j in (comp.prev_vertex(i), comp.next_vertex(i)):
            if comp.kinds[j] == PORT:
                raise GeometryError("two port segments may not be adjacent")
        for v in (i, comp.next_vertex(i)):
            if abs(comp.angles[v] - math.pi / 2) > RIGHT_ANGLE_TOL:
                raise GeometryError(
                    f"port {comp.names[i]!r} meets a wall at {math.degrees(comp.angles[v]):.6f} degrees"
                )
    return comp


def polygon_component(vertices, port_edges=(), bc: str = DIRICHLET, k: float = 1.0, names=None) -> ComponentGeometry:
    """Convenience constructor: edge ``i`` joins vertex ``i`` to ``i+1``; ``port_edges`` lists port edge indices."""
    v = [tuple(map(float, p)) for p in vertices]
    n = len(v)
    names = names or {}
    segs = []
    for i in range(n):
        kind = PORT if i in port_edges else WALL
        segs.append(Segment(v[i], v[(i + 1) % n], kind, names.get(i)))
    return build_component(segs, bc, k)


def rectangle(length: float, width: float, ports=("left", "right"), bc=DIRICHLET, k=1.0, origin=(0.0, 0.0)):
    """Axis-aligned channel ``[0, length] x [-width/2, width/2]`` shifted by ``origin``."""
    x0, y0 = origin
    v = [(x0, y0 - width / 2), (x0 + length, y0 - width / 2), (x0 + length, y0 + width / 2), (x0, y0 + width / 2)]
    edge = {"bottom": 0, "right": 1, "top": 2, "left": 3}
    port_edges = {edge[p] for p in ports}
    names = {edge[p]: p for p in ports}
    return polygon_component(v, port_edges, bc, k, names)

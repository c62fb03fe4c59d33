"""Circuits as graphs of components joined across straight interfaces."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
import shapely.geometry
import shapely.ops

from ..modal import DIRICHLET, PortSpec, count_propagating, select_mode_count
from .component import (PORT, WALL, ComponentGeometry, GeometryError, Segment, build_component, polygon_component,
                        rectangle)

SNAP_TOL = 1e-9


@dataclass(frozen=True)
class Interface:
    """Shared port between component ``a`` (owns the frame) and component ``b``.

    ``port_a``/``port_b`` index the ports of the two components; ``spec`` is
    the cross-section as seen from ``a``; ``modes`` the retained mode count.
    """

    a: int
    port_a: int
    b: int
    port_b: int
    spec: PortSpec
    modes: int = 1


@dataclass(frozen=True)
class ExternalPort:
    comp: int
    port: int
    spec: PortSpec
    length: float = math.inf


@dataclass
class CircuitGraph:
    components: list
    interfaces: list = field(default_factory=list)
    externals: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for e in self.interfaces:
            for key in ((e.a, e.port_a), (e.b, e.port_b)):
                if key in seen:
                    raise GeometryError(f"port {key} used twice")
                seen.add(key)
        for x in self.externals:
            key = (x.comp, x.port)
            if key in seen:
                raise GeometryError(f"port {key} used twice")
            seen.add(key)

    @property
    def n_components(self) -> int:
        return len(self.components)

    def port_role(self, comp: int, port: int):
        """``("external", x)``, ``("owner", e)`` or ``("other", e)`` for a component port."""
        for x, ext in enumerate(self.externals):
            if ext.comp == comp and ext.port == port:
                return "external", x
        for e, itf in enumerate(self.interfaces):
            if itf.a == comp and itf.port_a == port:
                return "owner", e
            if itf.b == comp and itf.port_b == port:
                return "other", e
        raise KeyError((comp, port))

    def is_connected(self) -> bool:
        n = self.n_components
        if n == 0:
            return False
        adj = {i: set() for i in range(n)}
        for e in self.interfaces:
            adj[e.a].add(e.b)
            adj[e.b].add(e.a)
        stack, seen = [0], {0}
        while stack:
            i = stack.pop()
            for j in adj[i] - seen:
                seen.add(j)
                stack.append(j)
        return len(seen) == n

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        comps = []
        for c in self.components:
            comps.append(
                {
                    "vertices": c.vertices.tolist(),
                    "rings": list(c.rings),
                    "kinds": list(c.kinds),
                    "names": list(c.names),
                    "bc": c.bc,
                    "k": c.k,
                }
            )
        return {
            "format": "wgscat-circuit",
            "version": 1,
            "components": comps,
            "interfaces": [
                {"a": e.a, "port_a": e.port_a, "b": e.b, "port_b": e.port_b, "modes": e.modes}
                for e in self.interfaces
            ],
            "externals": [
                {"comp": x.comp, "port": x.port, "length": (None if math.isinf(x.length) else x.length)}
                for x in self.externals
            ],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict, bc: str | None = None, k: float | None = None) -> "CircuitGraph":
        comps = []
        for c in data["components"]:
            v = np.asarray(c["vertices"], dtype=float)
            rings = c.get("rings") or [len(v)]
            n = rings[0]
            names = c.get("names") or [None] * len(v)
            segs = [Segment(tuple(v[i]), tuple(v[(i + 1) % n]), c["kinds"][i], names[i]) for i in range(n)]
            ends = np.cumsum(rings)
            holes = [v[e - r:e] for r, e in zip(rings[1:], ends[1:])]
            comps.append(build_component(segs, bc or c.get("bc", DIRICHLET), k or c.get("k", 1.0), holes=holes))
        itfs = []
        for e in data.get("interfaces", []):
            spec = comps[e["a"]].ports[e["port_a"]]
            itfs.append(Interface(e["a"], e["port_a"], e["b"], e["port_b"], spec, e.get("modes", 1)))
        exts = []
        for x in data.get("externals", []):
            spec = comps[x["comp"]].ports[x["port"]]
            length = x.get("length")
            exts.append(ExternalPort(x["comp"], x["port"], spec, math.inf if length is None else float(length)))
        g = cls(comps, itfs, exts, dict(data.get("meta", {})))
        check_interfaces(g)
        return g

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, path, bc=None, k=None) -> "CircuitGraph":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), bc, k)


def check_interfaces(graph: CircuitGraph, tol: float = 1e-12) -> None:
    """Both sides of every interface must describe the same segment with opposite frames."""
    for e in graph.interfaces:
        sa = graph.components[e.a].ports[e.port_a]
        sb = graph.components[e.b].ports[e.port_b]
        if abs(sa.width - sb.width) > tol * sa.width:
            raise GeometryError(f"interface {e} joins ports of different widths")
        if np.max(np.abs(np.subtract(sa.origin, sb.origin))) > tol * max(1.0, sa.width):
            raise GeometryError(f"interface {e} joins ports at different locations")
        if np.max(np.abs(np.add(sa.axis, sb.axis))) > 1e-10:
            raise GeometryError(f"interface {e} joins ports that do not face each other")


def single_component_graph(comp: ComponentGeometry, lengths=None) -> CircuitGraph:
    """A circuit of one component whose ports are all external."""
    n = len(comp.ports)
    lengths = [math.inf] * n if lengths is None else list(lengths)
    ext = [ExternalPort(0, p, comp.ports[p], lengths[p]) for p in range(n)]
    return CircuitGraph([comp], [], ext)


def interface_mode_count(graph: CircuitGraph, a: int, port_a: int, b: int, port_b: int, eps: float) -> int:
    """Retained modes on an interface: the larger of the two sides' counts."""
    ca, cb = graph.components[a], graph.components[b]
    ma = select_mode_count(ca.ports[port_a], ca.straight_length(port_a), eps)
    mb = select_mode_count(cb.ports[port_b], cb.straight_length(port_b), eps)
    return max(ma, mb)


def with_mode_counts(graph: CircuitGraph, eps: float) -> CircuitGraph:
    """Copy of ``graph`` whose interfaces carry the mode counts selected for tolerance ``eps``."""
    itfs = [
        Interface(e.a, e.port_a, e.b, e.port_b, e.spec, interface_mode_count(graph, e.a, e.port_a, e.b, e.port_b, eps))
        for e in graph.interfaces
    ]
    return CircuitGraph(graph.components, itfs, graph.externals, dict(graph.meta))


def external_mode_count(graph: CircuitGraph, x: int, eps: float) -> int:
    ext = graph.externals[x]
    comp = graph.components[ext.comp]
    length = comp.straight_length(ext.port)
    return select_mode_count(ext.spec, length, eps)


def component_mode_counts(graph: CircuitGraph, comp: int, eps: float) -> list:
    out = []
    for p in range(len(graph.components[comp].ports)):
        role, idx = graph.port_role(comp, p)
        if role == "external":
            out.append(external_mode_count(graph, idx, eps))
        else:
            out.append(graph.interfaces[idx].modes)
    return out


# ---------------------------------------------------------------------------
# union of a sub-assembly (monolithic oracle geometry)


def union_component(graph: CircuitGraph, members=None) -> tuple:
    """Merge ``members`` (default: all) into one component.

    Returns ``(component, port_map)`` where ``port_map[j] = (comp, port)``
    gives the origin of port ``j`` of the union.  Interfaces internal to the
    member set disappear; every other port keeps its segment.  Members that
    form a closed loop give a union with holes.
    """
    members = list(range(graph.n_components)) if members is None else list(members)
    polys = [graph.components[i].polygon() for i in members]
    merged = shapely.ops.unary_union(polys)
    if merged.geom_type != "Polygon":
        raise GeometryError("sub-assembly is not a single connected polygon")
    merged = shapely.set_precision(merged, 0) if hasattr(shapely, "set_precision") else merged
    ring = np.asarray(merged.exterior.coords)[:-1]
    ring = _drop_collinear(ring)
    first = graph.components[members[0]]
    # candidate ports: every member port not internal to the member set
    internal = set()
    for e in graph.interfaces:
        if e.a in members and e.b in members:
            internal.add((e.a, e.port_a))
            internal.add((e.b, e.port_b))
    cands = []
    for i in members:
        c = graph.components[i]
        for p, s in enumerate(c.port_segments):
            if (i, p) not in internal:
                seg = c.segment(s)
                cands.append(((i, p), np.asarray(seg.start), np.asarray(seg.end), c.names[s]))
    n = len(ring)
    segs = []
    hits = []
    for j in range(n):
        a, b = ring[j], ring[(j + 1) % n]
        kind, name, hit = WALL, None, None
        for key, pa, pb, nm in cands:
            if (_close(a, pa) and _close(b, pb)) or (_close(a, pb) and _close(b, pa)):
                kind, name, hit = PORT, nm, key
                a, b = (pa, pb) if _close(a, pa) else (pb, pa)
                break
        segs.append(Segment(tuple(a), tuple(b), kind, name))
        hits.append(hit)
    # members forming a closed loop enclose holes, bounded by member walls
    holes = [_drop_collinear(np.asarray(h.coords)[:-1]) for h in merged.interiors]
    comp = build_component(segs, first.bc, first.k, holes=holes)
    port_map = []
    # build_component may reverse the orientation; match ports back by location
    for s in comp.port_segments:
        seg = comp.segment(s)
        mid = 0.5 * (np.asarray(seg.start) + np.asarray(seg.end))
        for key, pa, pb, _ in cands:
            if _close(mid, 0.5 * (pa + pb)):
                port_map.append(key)
                break
        else:  # pragma: no cover - guarded by construction
            raise GeometryError("lost a port while merging components")
    if len(port_map) != len(cands):
        raise GeometryError("some member ports are not on the union boundary")
    return comp, port_map


def _close(p, q, tol=SNAP_TOL):
    return abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol


def _drop_collinear(ring: np.ndarray, tol=1e-10) -> np.ndarray:
    """Remove repeated vertices (closer than ``SNAP_TOL``) and straight-angle vertices."""
    dedup = [ring[0]]
    for p in ring[1:]:
        if not _close(p, dedup[-1]):
            dedup.append(p)
    if len(dedup) > 1 and _close(dedup[0], dedup[-1]):
        dedup.pop()
    ring = np.array(dedup)
    keep = []
    n = len(ring)
    for i in range(n):
        a, b, c = ring[i - 1], ring[i], ring[(i + 1) % n]
        u, v = b - a, c - b
        cross = u[0] * v[1] - u[1] * v[0]
        if abs(cross) > tol * np.linalg.norm(u) * np.linalg.norm(v) or u @ v < 0:
            keep.append(b)
    return np.array(keep)


# ---------------------------------------------------------------------------
# perturbed lattice generator


JUNCTION_SIMPLIFY = 1e-2
"""Junction outlines drop wall vertices deviating less than this fraction of the width."""


def _remove_slivers(ring: np.ndarray, ports, tol: float) -> np.ndarray:
    """Drop wall vertices that stick out less than ``tol`` from the line through their neighbours.

    Arm walls meeting the junction hull almost tangentially leave notches
    far smaller than the channel width; they are not physical corners but
    would receive deep corner grading.  Port endpoints and the far ends of
    the walls flanking each port are kept so port walls stay perpendicular.
    """
    ring = [np.asarray(p, dtype=float) for p in ring]

    def protected(i):
        n = len(ring)
        for pa, pb in ports:
            for q in (pa, pb):
                for j in (i, (i - 1) % n, (i + 1) % n):
                    if _close(ring[j], q, 1e-7):
                        return True
        return False

    while len(ring) > 3:
        n = len(ring)
        best, best_dev = None, tol
        for i in range(n):
            a, b, c = ring[i - 1], ring[i], ring[(i + 1) % n]
            ac = c - a
            dev = abs(ac[0] * (b - a)[1] - ac[1] * (b - a)[0]) / max(np.linalg.norm(ac), 1e-300)
            if dev < best_dev and not protected(i):
                best, best_dev = i, dev
        if best is None:
            break
        del ring[best]
    return np.array(ring)


def lattice_generator(rows: int, cols: int, spacing: float = 15.0, jitter: float = 2.25, edge_keep_prob: float = 0.8,
                      n_external_ports: int = 3, seed: int = 0, width: float = math.pi + 1, bc: str = DIRICHLET,
                      k: float = 1.0) -> CircuitGraph:
    """Random circuit on a jittered ``rows x cols`` grid of junctions.

    Each kept grid edge becomes a straight channel of the given width; each
    junction's component is the union of the half-channels towards its kept
    edges (each extended by half a width behind the node) together with the
    convex hull of their inner ends.  Interfaces sit at the edge midpoints.
    The graph is pruned to its largest connected part and
    ``n_external_ports`` boundary junctions receive a half-spacing stub that
    ends in an external port.
    """
    if rows < 2 or cols < 2:
        raise ValueError("lattice needs at least 2 rows and 2 columns")
    if not 0 <= edge_keep_prob <= 1:
        raise ValueError("edge_keep_prob must lie in [0, 1]")
    if spacing <= 2 * (jitter + width):
        raise ValueError("spacing must exceed 2 (jitter + width)")
    rng = np.random.default_rng(seed)
    pos = {}
    for r in range(rows):
        for c in range(cols):
            pos[(r, c)] = np.array([c * spacing, r * spacing]) + rng.uniform(-jitter, jitter, 2)
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append(((r, c), (r, c + 1)))
            if r + 1 < rows:
                edges.append(((r, c), (r + 1, c)))
    keep = rng.random(len(edges)) < edge_keep_prob
    edges = [e for e, kp in zip(edges, keep) if kp]
    if not edges:
        raise GeometryError("no lattice edges kept")
    # largest connected component
    adj = {}
    for u, v in edges:
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    best = set()
    seen = set()
    for start in sorted(adj):
        if start in seen:
            continue
        comp_nodes, stack = {start}, [start]
        while stack:
            x = stack.pop()
            for y in adj[x] - comp_nodes:
                comp_nodes.add(y)
                stack.append(y)
        seen |= comp_nodes
        if len(comp_nodes) > len(best):
            best = comp_nodes
    edges = [e for e in edges if e[0] in best]
    nodes = sorted(best)
    if len(nodes) < 2:
        raise GeometryError("lattice collapsed to a single junction")

    # external stubs on boundary nodes, pointing outward along a missing grid direction
    boundary = []
    for nd in nodes:
        r, c = nd
        for dr, dc in ((0, -1), (0, 1), (-1, 0), (1, 0)):
            rr, cc = r + dr, c + dc
            if not (0 <= rr < rows and 0 <= cc < cols):
                boundary.append((nd, (dr, dc)))
    if n_external_ports > len(boundary):
        raise GeometryError("not enough boundary junctions for the requested external ports")
    chosen = rng.choice(len(boundary), size=n_external_ports, replace=False) if n_external_ports else []
    stubs = {}
    for i in sorted(int(x) for x in chosen):
        nd, (dr, dc) = boundary[i]
        if nd in stubs:
            continue
        stubs[nd] = np.array([dc, dr], dtype=float)
    if len(stubs) < n_external_ports:
        # a junction drew two stub directions; take further distinct junctions deterministically
        for nd, (dr, dc) in boundary:
            if len(stubs) == n_external_ports:
                break
            if nd not in stubs:
                stubs[nd] = np.array([dc, dr], dtype=float)

    # half-channel arms per node: (direction, length, tag)
    arms = {nd: [] for nd in nodes}
    for idx, (u, v) in enumerate(edges):
        d = pos[v] - pos[u]
        L = np.linalg.norm(d)
        t = d / L
        mid = 0.5 * (pos[u] + pos[v])
        arms[u].append((t, mid, ("edge", idx)))
        arms[v].append((-t, mid, ("edge", idx)))
    for nd, dvec in stubs.items():
        end = pos[nd] + 0.5 * spacing * dvec
        arms[nd].append((dvec, end, ("ext", nd)))

    hw = 0.5 * width
    comps = []
    port_keys = []
    for nd in nodes:
        c0 = pos[nd]
        pieces = []
        hull_pts = []
        arm_ports = []
        for t, end, tag in arms[nd]:
            nrm = np.array([-t[1], t[0]])
            back = c0 - hw * t
            quad = [back - hw * nrm, end - hw * nrm, end + hw * nrm, back + hw * nrm]
            pieces.append(shapely.geometry.Polygon(quad))
            hull_pts += [quad[0], quad[3]]
            arm_ports.append((end - hw * nrm, end + hw * nrm, tag))
        hull = shapely.geometry.MultiPoint(hull_pts).convex_hull
        poly = shapely.ops.unary_union(pieces + ([hull] if hull.geom_type == "Polygon" else []))
        if poly.geom_type != "Polygon" or len(poly.interiors):
            raise GeometryError(f"junction {nd} does not form a simple polygon")
        ring = _drop_collinear(np.asarray(poly.exterior.coords)[:-1])
        ring = _remove_slivers(ring, [(pa, pb) for pa, pb, _ in arm_ports], JUNCTION_SIMPLIFY * width)
        segs = []
        nv = len(ring)
        for j in range(nv):
            a, b = ring[j], ring[(j + 1) % nv]
            kind, name = WALL, None
            for pa, pb, tag in arm_ports:
                if (_close(a, pa, 1e-7) and _close(b, pb, 1e-7)) or (_close(a, pb, 1e-7) and _close(b, pa, 1e-7)):
                    kind, name = PORT, f"{tag[0]}{tag[1] if tag[0] == 'edge' else ''}"
                    # snap exactly onto the shared endpoints
                    a, b = (pa, pb) if _close(a, pa, 1e-7) else (pb, pa)
                    break
            segs.append(Segment(tuple(a), tuple(b), kind, name))
        # make consecutive segments share snapped vertices
        segs = _resnap(segs)
        comp = build_component(segs, bc, k)
        comps.append(comp)
        port_keys.append(arm_ports)

    # overlap check between components
    polys = [c.polygon() for c in comps]
    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            if polys[i].intersection(polys[j]).area > 1e-9:
                raise GeometryError("components overlap after jitter")

    node_index = {nd: i for i, nd in enumerate(nodes)}
    itfs = []
    for idx, (u, v) in enumerate(edges):
        a, b = node_index[u], node_index[v]
        pa = comps[a].port_index(f"edge{idx}")
        pb = comps[b].port_index(f"edge{idx}")
        itfs.append(Interface(a, pa, b, pb, comps[a].ports[pa], 1))
    exts = []
    for nd in stubs:
        a = node_index[nd]
        p = comps[a].port_index("ext")
        exts.append(ExternalPort(a, p, comps[a].ports[p], 0.5 * spacing))
    meta = {
        "generator": "lattice",
        "rows": rows,
        "cols": cols,
        "spacing": spacing,
        "jitter": jitter,
        "edge_keep_prob": edge_keep_prob,
        "n_external_ports": n_external_ports,
        "seed": seed,
        "width": width,
    }
    g = CircuitGraph(comps, itfs, exts, meta)
    check_interfaces(g)
    return g


def _resnap(segs):
    """Make consecutive segments share vertices, preferring the exact port endpoints."""
    n = len(segs)
    verts = []
    for j in range(n):
        if segs[j].kind == PORT:
            verts.append(segs[j].start)
        elif segs[j - 1].kind == PORT:
            verts.append(segs[j - 1].end)
        else:
            verts.append(segs[j].start)
    return [Segment(verts[j], verts[(j + 1) % n], segs[j].kind, segs[j].name) for j in range(n)]


# ---------------------------------------------------------------------------
# small reference circuits


def chain_graph(lengths, width: float = math.pi + 1, bc: str = DIRICHLET, k: float = 1.0,
                modes: int = 1) -> CircuitGraph:
    """Straight channels placed end to end along ``x``.

    Component ``j`` owns the interface on its right end; the left end of the
    first and the right end of the last channel are external ports.
    """
    lengths = [float(v) for v in lengths]
    if not lengths or min(lengths) <= 0:
        raise ValueError("chain needs positive channel lengths")
    comps, x = [], 0.0
    for L in lengths:
        comps.append(rectangle(L, width, ("left", "right"), bc, k, (x, 0.0)))
        x += L
    itfs = []
    for j in range(len(comps) - 1):
        pa = comps[j].port_index("right")
        pb = comps[j + 1].port_index("left")
        itfs.append(Interface(j, pa, j + 1, pb, comps[j].ports[pa], modes))
    first, last = comps[0], comps[-1]
    exts = [
        ExternalPort(0, first.port_index("left"), first.ports[first.port_index("left")], lengths[0]),
        ExternalPort(len(comps) - 1, last.port_index("right"), last.ports[last.port_index("right")], lengths[-1]),
    ]
    g = CircuitGraph(comps, itfs, exts, {"generator": "chain", "lengths": lengths, "width": width})
    check_interfaces(g)
    return g


def two_component_template(L: float, width: float = math.pi + 1, bc: str = DIRICHLET, k: float = 1.0,
                           modes: int = 1) -> CircuitGraph:
    """Two scatterers joined by a straight channel of length ``L`` cut at its midpoint.

    The left component has side cavities on both walls of different depth
    and the right one has an offset pair as well, so neither is mirror
    symmetric and every mode, odd or even, is excited at the interface.
    Each external lead is 2 long; the interface sits at ``x = L/2``.
    """
    if not L > 0:
        raise ValueError("channel length must be positive")
    h = 0.5 * width
    left = [(-6, -h), (-3, -h), (-3, -h - 1.5), (0, -h - 1.5), (0, -h), (L / 2, -h), (L / 2, h),
            (-2, h), (-2, h + 1), (-4, h + 1), (-4, h), (-6, h)]
    right = [(L / 2, -h), (L, -h), (L, -h - 1.2), (L + 3, -h - 1.2), (L + 3, -h), (L + 6, -h), (L + 6, h),
             (L + 4, h), (L + 4, h + 0.8), (L + 1, h + 0.8), (L + 1, h), (L / 2, h)]
    c1 = polygon_component(left, {5, 11}, bc, k, {5: "itf", 11: "ext"})
    c2 = polygon_component(right, {5, 11}, bc, k, {5: "ext", 11: "itf"})
    p1, p2 = c1.port_index("itf"), c2.port_index("itf")
    itf = Interface(0, p1, 1, p2, c1.ports[p1], modes)
    exts = [
        ExternalPort(0, c1.port_index("ext"), c1.ports[c1.port_index("ext")], 2.0),
        ExternalPort(1, c2.port_index("ext"), c2.ports[c2.port_index("ext")], 2.0),
    ]
    g = CircuitGraph([c1, c2], [itf], exts, {"generator": "two_component", "L": L, "width": width})
    check_interfaces(g)
    return g

"""Gauss-Legendre panelization of component boundaries with graded corners."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .component import PORT, ComponentGeometry, GeometryError

NODES_PER_PANEL = 16
# Geometric corner refinement: each level shrinks the corner panel by
# GRADING_RATIO.  The discretization error is set by the innermost panel, so
# a ratio of 4 reaches a given size with half the panels of dyadic halving;
# larger ratios lose accuracy in the neighbour interactions.  The depth
# depends on the corner: Dirichlet walls only carry a strong singularity at
# reentrant corners (port corners are smoothed by the image curves), while
# the Neumann density behaves like r^(-1/3) at every corner.
GRADING_RATIO = 4.0
MIN_PANEL_FRACTION = 1e-13
"""Grading stops before panels shrink below this fraction of the component diameter."""
DEFAULT_GRADING = {
    "dirichlet": {"reentrant": 9, "port": 5, "convex": 3},
    "neumann": {"reentrant": 18, "port": 18, "convex": 18},
}
COLLINEAR_TOL = 1e-9

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(NODES_PER_PANEL)


@dataclass(frozen=True)
class PanelOptions:
    """Panelization controls.

    ``h`` is the base panel length (additionally capped at a sixth of the
    wavelength), ``levels`` the number of refinements towards each corner
    (see :func:`vertex_levels`), ``ratio`` the length ratio between
    successive refinements, ``mode_counts`` the retained mode count per port (sets the
    minimum port panel count) and ``image_radius`` an optional override of
    the reflection radius per port.
    """

    h: float = 1.0
    levels: int | tuple | None = None
    ratio: float = GRADING_RATIO
    mode_counts: tuple | None = None
    image_radius: tuple | None = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("panel length h must be positive")
        if self.levels is not None and np.min(self.levels) < 0:
            raise ValueError("grading levels must be nonnegative")
        if not self.ratio > 1:
            raise ValueError("grading ratio must exceed 1")


def port_panel_count(mode_count: int) -> int:
    """Minimum number of 16-point panels that puts 8 nodes on every half-wavelength of mode ``mode_count``."""
    return max(4, math.ceil(mode_count / 2))


def reflect_points(points, origin, axis):
    """Mirror points about the line through ``origin`` with unit normal ``axis``."""
    p = np.asarray(points, dtype=float)
    o = np.asarray(origin, dtype=float)
    a = np.asarray(axis, dtype=float)
    s = (p - o) @ a
    return p - 2.0 * s[..., None] * a


def reflect_vectors(vectors, axis):
    v = np.asarray(vectors, dtype=float)
    a = np.asarray(axis, dtype=float)
    return v - 2.0 * (v @ a)[..., None] * a


@dataclass
class Discretization:
    """Paneled boundary of one component.

    Panels are straight (every boundary piece is a polygon edge).  Panel
    ``i`` carries nodes ``16 i .. 16 i + 15``.  Image panels are the mirrors
    of the wall panels in ``Gamma_r`` about the port they flank; image panel
    ``j`` reuses the unknowns of panel ``image_source[j]`` node by node.
    """

    comp: ComponentGeometry
    start: np.ndarray  # (P, 2)
    end: np.ndarray  # (P, 2)
    segment: np.ndarray  # (P,)
    level: np.ndarray  # (P,) grading level, 0 for unrefined panels
    mode_counts: tuple
    image_radius: tuple
    image_source: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    image_port: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    levels: int = 0

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float)
        self.end = np.asarray(self.end, dtype=float)
        self.segment = np.asarray(self.segment, dtype=np.int64)
        self.level = np.asarray(self.level, dtype=np.int64)
        t = self.end - self.start
        self.lengths = np.hypot(t[:, 0], t[:, 1])
        self.tangents = t / self.lengths[:, None]
        self.normals = np.stack([self.tangents[:, 1], -self.tangents[:, 0]], axis=1)
        half = 0.5 * self.lengths
        mid = 0.5 * (self.start + self.end)
        s = GL_NODES[None, :, None] * half[:, None, None] * self.tangents[:, None, :]
        self.nodes = (mid[:, None, :] + s).reshape(-1, 2)
        self.weights = (GL_WEIGHTS[None, :] * half[:, None]).ravel()
        self.node_normals = np.repeat(self.normals, NODES_PER_PANEL, axis=0)
        self.node_panel = np.repeat(np.arange(self.n_panels), NODES_PER_PANEL)
        seg_kind = np.array([kd == PORT for kd in self.comp.kinds])
        self.panel_is_port = seg_kind[self.segment]
        port_of_segment = -np.ones(self.comp.n_segments, dtype=np.int64)
        for j, s_ in enumerate(self.comp.port_segments):
            port_of_segment[s_] = j
        self.panel_port = port_of_segment[self.segment]
        self.node_port = np.repeat(self.panel_port, NODES_PER_PANEL)
        # which port's image curve (if any) a source panel belongs to
        self.panel_image_port = -np.ones(self.n_panels, dtype=np.int64)
        self.panel_image_port[self.image_source] = self.image_port

    # -- sizes ------------------------------------------------------------
    @property
    def n_panels(self) -> int:
        return len(self.start)

    @property
    def n_nodes(self) -> int:
        return self.n_panels * NODES_PER_PANEL

    @property
    def n_images(self) -> int:
        return len(self.image_source)

    # -- selections -------------------------------------------------------
    def port_panels(self, p: int) -> np.ndarray:
        return np.flatnonzero(self.panel_port == p)

    def port_nodes(self, p: int) -> np.ndarray:
        return np.flatnonzero(self.node_port == p)

    def wall_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_port < 0)

    def port_quadrature(self, p: int):
        """Transverse coordinates and weights of port ``p``'s nodes, in its frame."""
        idx = self.port_nodes(p)
        spec = self.comp.ports[p]
        return spec.transverse(self.nodes[idx]), self.weights[idx], idx

    # -- image panels -----------------------------------------------------
    def image_geometry(self):
        """Endpoints and normals of the image panels (mirror of each source panel)."""
        q = self.n_images
        a = np.empty((q, 2))
        b = np.empty((q, 2))
        nrm = np.empty((q, 2))
        for j in range(q):
            spec = self.comp.ports[self.image_port[j]]
            src = self.image_source[j]
            a[j] = reflect_points(self.start[src], spec.origin, spec.axis)
            b[j] = reflect_points(self.end[src], spec.origin, spec.axis)
            nrm[j] = reflect_vectors(self.normals[src], spec.axis)
        return a, b, nrm

    def image_nodes(self) -> np.ndarray:
        """Image node coordinates, ``(Q * 16, 2)``, paired with the source panels' nodes."""
        out = []
        for j in range(self.n_images):
            spec = self.comp.ports[self.image_port[j]]
            src = self.image_source[j]
            sl = slice(src * NODES_PER_PANEL, (src + 1) * NODES_PER_PANEL)
            out.append(reflect_points(self.nodes[sl], spec.origin, spec.axis))
        if not out:
            return np.zeros((0, 2))
        return np.concatenate(out)

    def min_panel_length(self) -> float:
        return float(self.lengths.min())

    def corner_distance(self, points) -> np.ndarray:
        """Distance from each point to the nearest non-straight vertex."""
        v = self.comp.vertices[np.abs(self.comp.angles - math.pi) > COLLINEAR_TOL]
        p = np.atleast_2d(points)
        if len(v) == 0:
            return np.full(len(p), np.inf)
        return np.min(np.hypot(p[:, None, 0] - v[None, :, 0], p[:, None, 1] - v[None, :, 1]), axis=1)


def default_image_radius(comp: ComponentGeometry) -> list:
    """Per-port reflection radius ``min(d_p, flanking wall length)``.

    A wall that joins two port corners is shared: each port may claim at most
    half of it so that every wall panel is mirrored about its closest port.
    """
    radii = []
    for p, s in enumerate(comp.port_segments):
        r = comp.ports[p].width
        before, after = comp.prev_vertex(s), comp.next_vertex(s)
        for w, other in ((before, comp.prev_vertex(before)), (after, comp.next_vertex(after))):
            length = comp.segment_length(w)
            # the wall's far end touches another port when the next segment over is a port
            if comp.kinds[other] == PORT:
                length *= 0.5
            r = min(r, length)
        radii.append(r)
    return radii


def corner_kind(comp: ComponentGeometry, v: int) -> str | None:
    """``"port"``, ``"reentrant"``, ``"convex"`` or ``None`` (straight) for vertex ``v``."""
    if abs(comp.angles[v] - math.pi) <= COLLINEAR_TOL:
        return None
    if comp.kinds[v] == PORT or comp.kinds[comp.prev_vertex(v)] == PORT:
        return "port"
    return "reentrant" if comp.angles[v] > math.pi else "convex"


def grading_levels(bc: str, kind: str = "reentrant") -> int:
    """Default refinement depth at a corner of the given kind."""
    return DEFAULT_GRADING[bc][kind]


def vertex_levels(comp: ComponentGeometry, levels=None) -> list:
    """Grading depth at every vertex (zero at straight vertices).

    ``levels`` may be ``None`` (the boundary-condition default for each
    corner kind), one integer for all corners, or one integer per vertex.
    """
    kinds = [corner_kind(comp, v) for v in range(comp.n_segments)]
    if levels is None:
        return [grading_levels(comp.bc, k) if k else 0 for k in kinds]
    if np.isscalar(levels):
        return [int(levels) if k else 0 for k in kinds]
    levels = [int(v) for v in levels]
    if len(levels) != comp.n_segments:
        raise ValueError("one grading depth per vertex is required")
    return [v if k else 0 for v, k in zip(levels, kinds)]


def panelize(comp: ComponentGeometry, opts: PanelOptions | None = None) -> Discretization:
    """Split every boundary segment into straight 16-node Gauss-Legendre panels.

    Each segment is cut at the image radius along walls flanking a port, then
    divided into equal panels no longer than ``min(h, lambda/6)``; port
    segments get at least :func:`port_panel_count` panels.  The panel touching
    each non-straight vertex is refined geometrically towards it.
    """
    opts = opts or PanelOptions()
    n_ports = len(comp.ports)
    counts = tuple(opts.mode_counts) if opts.mode_counts is not None else tuple([1] * n_ports)
    if len(counts) != n_ports:
        raise ValueError("one mode count per port is required")
    radii = list(opts.image_radius) if opts.image_radius is not None else default_image_radius(comp)
    if len(radii) != n_ports:
        raise ValueError("one image radius per port is required")
    h = min(opts.h, 2 * math.pi / comp.k / 6)
    n = comp.n_segments
    vlev = vertex_levels(comp, opts.levels)
    n_levels = int(max(vlev, default=0))

    # arclength breakpoints from the image radius on flanking walls
    cuts = {i: set() for i in range(n)}
    for p, s in enumerate(comp.port_segments):
        r = radii[p]
        before, after = comp.prev_vertex(s), comp.next_vertex(s)
        for w in (before, after):
            if r > comp.segment_length(w) * (1 + 1e-12):
                raise GeometryError(f"image radius {r} exceeds the wall flanking port {comp.names[s]!r}")
        lb = comp.segment_length(before)
        if r < lb * (1 - 1e-12):
            cuts[before].add(lb - r)
        la = comp.segment_length(after)
        if r < la * (1 - 1e-12):
            cuts[after].add(r)

    extent = np.ptp(comp.vertices, axis=0)
    min_panel = MIN_PANEL_FRACTION * float(np.hypot(*extent))
    starts, ends, segs, levels = [], [], [], []
    for i in range(n):
        seg_len = comp.segment_length(i)
        a = comp.vertices[i]
        b = comp.vertices[comp.next_vertex(i)]
        t = (b - a) / seg_len
        bps = [0.0] + sorted(cuts[i]) + [seg_len]
        for j in range(len(bps) - 1):
            s0, s1 = bps[j], bps[j + 1]
            m = max(1, math.ceil((s1 - s0) / h * (1 - 1e-12)))
            if comp.kinds[i] == PORT:
                m = max(m, port_panel_count(counts[comp.port_segments.index(i)]))
            gs = vlev[i] if j == 0 else 0
            ge = vlev[comp.next_vertex(i)] if j == len(bps) - 2 else 0
            # keep the innermost panel resolvable in floating point
            ell = (s1 - s0) / m / (2 if m == 1 and gs and ge else 1)
            depth_cap = max(0, math.floor(math.log(ell / min_panel) / math.log(opts.ratio)))
            gs, ge = min(gs, depth_cap), min(ge, depth_cap)
            pts, lev = _grade(s0, s1, m, gs, ge, opts.ratio)
            for k_ in range(len(pts) - 1):
                starts.append(a + pts[k_] * t)
                ends.append(a + pts[k_ + 1] * t)
                segs.append(i)
                levels.append(lev[k_])
        # snap the segment end exactly onto the vertex
        ends[-1] = b.copy()

    starts = np.array(starts)
    ends = np.array(ends)
    segs = np.array(segs)

    base = Discretization(comp, starts, ends, segs, np.array(levels), counts, tuple(radii), levels=n_levels)
    _, _, _, img_src, img_port = image_curves(comp, base, radii)
    return Discretization(
        comp, starts, ends, segs, np.array(levels), counts, tuple(radii), img_src, img_port, n_levels
    )


def _grade(s0: float, s1: float, n: int, levels_start: int, levels_end: int, ratio: float = GRADING_RATIO):
    """Breakpoints and grading levels for ``n`` equal panels on ``[s0, s1]``.

    The panel touching the start (end) is refined ``levels_start``
    (``levels_end``) times towards it, each time splitting off all but a
    ``1/ratio`` fraction, so the innermost panel has length
    ``(s1 - s0) / (n ratio^levels)``.
    """
    pts = list(np.linspace(s0, s1, n + 1))
    if not (levels_start or levels_end):
        return pts, [0] * n
    if n == 1 and levels_start and levels_end:
        pts = [s0, 0.5 * (s0 + s1), s1]
    lev = [0] * (len(pts) - 1)
    if levels_start:
        a, b = pts[0], pts[1]
        ell = b - a
        inner = [a + ell / ratio**j for j in range(levels_start, 0, -1)]
        pts = [a] + inner + pts[1:]
        lev = [levels_start] + list(range(levels_start, 0, -1)) + lev[1:]
    if levels_end:
        a, b = pts[-2], pts[-1]
        ell = b - a
        inner = [b - ell / ratio**j for j in range(1, levels_end + 1)]
        pts = pts[:-1] + inner + [b]
        lev = lev[:-1] + list(range(1, levels_end + 1)) + [levels_end]
    return pts, lev


def image_curves(comp: ComponentGeometry, disc: Discretization, r=None):
    """Mirror the wall panels within ``r`` of each port about that port's line.

    Returns ``(start, end, normals, source_panel, port)`` for the image panels.
    ``r`` may be a scalar or a per-port sequence; by default the radii stored
    in ``disc`` are used.  The discretization must have a breakpoint at
    distance ``r`` along each flanking wall (``panelize`` places one).
    """
    if r is None:
        radii = disc.image_radius
    else:
        radii = tuple(np.broadcast_to(np.asarray(r, dtype=float), (len(comp.ports),)))
    src, port = [], []
    for p, s in enumerate(comp.port_segments):
        rp = radii[p]
        if not rp > 0:
            raise GeometryError("image radius must be positive")
        spec = comp.ports[p]
        for w in (comp.prev_vertex(s), comp.next_vertex(s)):
            if rp > comp.segment_length(w) * (1 + 1e-12):
                raise GeometryError(f"image radius {rp} exceeds the wall flanking port {comp.names[s]!r}")
            for q in np.flatnonzero(disc.segment == w):
                # distance of the panel's far end from the port line
                far = max(abs(spec.along_axis(disc.start[q])), abs(spec.along_axis(disc.end[q])))
                if far <= rp * (1 + 1e-12):
                    src.append(q)
                    port.append(p)
    src = np.array(src, dtype=np.int64)
    port = np.array(port, dtype=np.int64)
    a = np.empty((len(src), 2))
    b = np.empty((len(src), 2))
    nrm = np.empty((len(src), 2))
    for j, (q, p) in enumerate(zip(src, port)):
        spec = comp.ports[p]
        a[j] = reflect_points(disc.start[q], spec.origin, spec.axis)
        b[j] = reflect_points(disc.end[q], spec.origin, spec.axis)
        nrm[j] = reflect_vectors(disc.normals[q], spec.axis)
    return a, b, nrm, src, port

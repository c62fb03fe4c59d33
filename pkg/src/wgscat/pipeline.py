"""End-to-end scattering-matrix computation for a circuit graph.

The steps follow the usual divide-and-conquer pipeline:

1. interfaces sit halfway along the straight channels joining components
   (the lattice generator builds them that way; user graphs are checked);
2. retained mode counts per interface/external port from the tolerance;
3. discretize and factorize every component;
4. one impedance-to-impedance map per component;
5. sparse gluing over the interface graph;
6. the scattering matrix of the device.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry.component import ComponentGeometry, polygon_component
from .geometry.graph import CircuitGraph, check_interfaces, component_mode_counts, with_mode_counts
from .geometry.panels import Discretization, PanelOptions, panelize
from .glue import GlueSystem, ScatteringResult, assemble_graph_system, schur_reduce, scattering_matrix
from .i2i import I2IMap, compute_i2i
from .modal import DIRICHLET, parity
from .potentials.hankel import hankel0, hankel1
from .solver import DEFAULT_ETA, BieSystem, assemble, eval_field, port_rhs, solve

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-14
STEPS = ("halving", "modes", "factorize", "i2i", "glue", "smatrix")


@dataclass
class ComponentSolve:
    index: int
    disc: Discretization
    system: BieSystem | None  # dropped after the map unless kept for field evaluation
    i2i: I2IMap
    counts: list
    seconds_factorize: float
    seconds_i2i: float


@dataclass
class PipelineResult:
    graph: CircuitGraph
    components: list
    glue: GlueSystem
    device: I2IMap
    scattering: ScatteringResult
    timings: dict = field(default_factory=dict)
    eta: complex = DEFAULT_ETA
    keep_systems: bool = False

    def stats(self) -> dict:
        """Problem-size statistics: nodes ``n`` and retained modes per component."""
        n = np.array([c.disc.n_nodes for c in self.components])
        m_tot = np.array([sum(c.counts) for c in self.components])
        per_channel = [e.modes for e in self.graph.interfaces]
        return {
            "components": len(self.components),
            "interfaces": len(self.graph.interfaces),
            "externals": len(self.graph.externals),
            "n_pts": int(n.sum()),
            "n_mean": float(n.mean()),
            "n_max": int(n.max()),
            "modes_per_component_mean": float(m_tot.mean()),
            "modes_per_interface_mean": float(np.mean(per_channel)) if per_channel else 0.0,
            "modes_per_interface_max": int(max(per_channel)) if per_channel else 0,
            "interface_unknowns": int(self.glue.n_interface_unknowns),
        }

    def log_record(self) -> dict:
        return {"timings": dict(self.timings), "stats": self.stats(),
                "flux_residual": self.scattering.flux_residual()}


def solve_component(comp: ComponentGeometry, counts, eta=DEFAULT_ETA, h: float = 1.0, levels=None,
                    index: int = 0) -> ComponentSolve:
    """Discretize, factorize and compute the map of one component."""
    t0 = time.perf_counter()
    disc = panelize(comp, PanelOptions(h=h, levels=levels, mode_counts=tuple(counts)))
    system = assemble(disc, eta)
    t1 = time.perf_counter()
    imap = compute_i2i(comp, disc, eta, counts, system=system)
    t2 = time.perf_counter()
    return ComponentSolve(index, disc, system, imap, list(counts), t1 - t0, t2 - t1)


def run_pipeline(graph: CircuitGraph, eta=DEFAULT_ETA, tol: float = DEFAULT_TOL, h: float = 1.0, levels=None,
                 closure: str = "semi_infinite", keep_systems: bool = False) -> PipelineResult:
    """Scattering matrix of a circuit, timing each step.

    Dense component factorizations are released once their maps are built
    unless ``keep_systems`` is set; :func:`device_field` rebuilds them on
    demand.
    """
    if not 1e-15 < tol < 1e-2:
        raise ValueError("tolerance must lie in (1e-15, 1e-2)")
    timings = dict.fromkeys(STEPS, 0.0)
    t = time.perf_counter()
    check_interfaces(graph)
    timings["halving"] = time.perf_counter() - t

    t = time.perf_counter()
    graph = with_mode_counts(graph, tol)
    counts = [component_mode_counts(graph, j, tol) for j in range(graph.n_components)]
    timings["modes"] = time.perf_counter() - t

    comps = []
    for j, comp in enumerate(graph.components):
        try:
            cs = solve_component(comp, counts[j], eta, h, levels, j)
        except Exception as exc:
            raise type(exc)(f"component {j}: {exc}") from exc
        timings["factorize"] += cs.seconds_factorize
        timings["i2i"] += cs.seconds_i2i
        if not keep_systems:
            cs.system = None
        comps.append(cs)
        log.debug("component %d: n=%d modes=%s", j, cs.disc.n_nodes, cs.counts)

    t = time.perf_counter()
    glue = assemble_graph_system(graph, [c.i2i for c in comps])
    names = [f"{graph.components[x.comp].names[graph.components[x.comp].port_segments[x.port]] or 'ext'}@{x.comp}"
             for x in graph.externals]
    device = schur_reduce(glue, names)
    timings["glue"] = time.perf_counter() - t
    timings["glue_sparse_solve"] = glue.timings.get("factor", 0.0) + glue.timings.get("schur", 0.0)

    t = time.perf_counter()
    smat = scattering_matrix(device, eta, closure=closure)
    timings["smatrix"] = time.perf_counter() - t
    timings["total"] = sum(timings[s] for s in STEPS)
    return PipelineResult(graph, comps, glue, device, smat, timings, complex(eta), keep_systems)


def incoming_port_data(result: PipelineResult, c_minus) -> list:
    """Incoming impedance coefficients on every port of every component for incident ``c_minus``."""
    c = np.asarray(c_minus, dtype=complex)
    f = result.scattering.F @ c
    h = result.glue.interface_data(f)
    g = result.graph
    data = []
    for j, cs in enumerate(result.components):
        per_port = []
        for p in range(len(cs.counts)):
            role, idx = g.port_role(j, p)
            if role == "external":
                o = result.glue.f_offsets[idx]
                per_port.append(f[o : o + cs.counts[p]])
            else:
                hp, hm = result.glue.interface_split(h, idx)
                if role == "owner":
                    per_port.append(hp)
                else:
                    per_port.append(-parity(g.interfaces[idx].spec, len(hm)) * hm)
        data.append(per_port)
    return data


def _system(cs: ComponentSolve, eta) -> BieSystem:
    if cs.system is None:
        cs.system = assemble(cs.disc, eta)
    return cs.system


def component_density(cs: ComponentSolve, port_data, eta=DEFAULT_ETA) -> np.ndarray:
    system = _system(cs, eta)
    rhs = np.zeros(cs.disc.n_nodes, dtype=complex)
    for p, coef in enumerate(port_data):
        rhs += port_rhs(system, p, coef)
    return solve(system, rhs)


def device_field(result: PipelineResult, c_minus, points) -> np.ndarray:
    """Total field at ``points``; NaN outside every component (and on interfaces)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.full(len(pts), np.nan + 0j)
    data = incoming_port_data(result, c_minus)
    for cs, port_data in zip(result.components, data):
        inside = cs.disc.comp.contains(pts) & np.isnan(out.real)
        if not inside.any():
            continue
        dens = component_density(cs, port_data, result.eta)
        out[inside] = eval_field(cs.system, dens, pts[inside]).values
        if not result.keep_systems:
            cs.system = None
    return out


# ---------------------------------------------------------------------------
# analytic point-source test


def analytic_test_component(bc: str = DIRICHLET, k: float = 1.0, width: float = math.pi + 1,
                            arm: float = 12.0) -> ComponentGeometry:
    """L-shaped bend with a single port on its left end."""
    d = width
    v = [(0, -d / 2), (arm, -d / 2), (arm, arm), (arm - d, arm), (arm - d, d / 2), (0, d / 2)]
    return polygon_component(v, {5}, bc, k, {5: "port"})


def point_source(k: float, x0, points, normals=None):
    """``G_k(x, x0) = (i/4) H_0(k|x - x0|)`` and, if normals are given, its normal derivative."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = pts - np.asarray(x0, dtype=float)
    r = np.hypot(d[:, 0], d[:, 1])
    u = 0.25j * hankel0(k * r)
    if normals is None:
        return u
    nrm = np.atleast_2d(np.asarray(normals, dtype=float))
    du = -0.25j * k * hankel1(k * r) * np.sum(d * nrm, axis=1) / r
    return u, du


@dataclass
class AnalyticReport:
    bc: str
    n: int
    max_error: float
    max_error_all: float
    points: np.ndarray
    error: np.ndarray
    near_corner: np.ndarray
    seconds: float

    def passed(self, threshold: float) -> bool:
        return bool(self.max_error <= threshold)


def verify_analytic(comp: ComponentGeometry, x0=(40.0, 20.0), eta=DEFAULT_ETA, h: float = 1.0, levels=None,
                    grid: int = 60, modes: int = 5) -> AnalyticReport:
    """Solve with boundary data of ``G_k(., x0)`` and compare the interior field with it."""
    x0 = np.asarray(x0, dtype=float)
    if comp.contains(x0[None, :])[0]:
        raise ValueError("the analytic test needs a source outside the component")
    t = time.perf_counter()
    disc = panelize(comp, PanelOptions(h=h, levels=levels, mode_counts=tuple([modes] * len(comp.ports))))
    system = assemble(disc, eta)
    u, du = point_source(comp.k, x0, disc.nodes, disc.node_normals)
    on_port = disc.node_port >= 0
    wall_data = u if comp.bc == DIRICHLET else du
    rhs = np.where(on_port, du + 1j * system.eta * u, wall_data)
    dens = solve(system, rhs)
    xmin, ymin, xmax, ymax = comp.polygon().bounds
    X, Y = np.meshgrid(np.linspace(xmin, xmax, grid + 2)[1:-1], np.linspace(ymin, ymax, grid + 2)[1:-1])
    pts = np.c_[X.ravel(), Y.ravel()]
    pts = pts[comp.contains(pts)]
    fr = eval_field(system, dens, pts)
    err = np.abs(fr.values - point_source(comp.k, x0, pts))
    seconds = time.perf_counter() - t
    away = ~fr.near_corner
    return AnalyticReport(comp.bc, disc.n_nodes, float(err[away].max()), float(err.max()), pts, err,
                          fr.near_corner, seconds)


# ---------------------------------------------------------------------------
# merge error against the monolithic oracle


def merge_error(L: float, modes, bc: str = DIRICHLET, eta=DEFAULT_ETA, h: float = 1.0, levels=None,
                tol: float = DEFAULT_TOL, width: float = math.pi + 1) -> dict:
    """Max-entry difference between merged and monolithic maps of the two-component template.

    ``modes`` lists interface mode counts ``M``; both component maps are
    computed once with the largest count and truncated (a truncated map is
    exactly the block of the larger one).  Returns ``{M: error}``.
    """
    from .geometry.graph import external_mode_count, two_component_template, union_component
    from .glue import InterfaceCoupling, merge_pair
    from .i2i import monolithic_i2i

    modes = sorted(int(m) for m in modes)
    g = two_component_template(L, width, bc)
    m_ext = [external_mode_count(g, x, tol) for x in range(len(g.externals))]
    itf = g.interfaces[0]
    full = []
    for j, comp in enumerate(g.components):
        counts = [0] * len(comp.ports)
        counts[itf.port_a if j == itf.a else itf.port_b] = modes[-1]
        for x, ext in enumerate(g.externals):
            if ext.comp == j:
                counts[ext.port] = m_ext[x]
        full.append(solve_component(comp, counts, eta, h, levels, j).i2i)
    union, port_map = union_component(g)
    mono = monolithic_i2i(union, PanelOptions(h=h, levels=levels), eta,
                          counts=[m_ext[g.port_role(c, p)[1]] for c, p in port_map])
    # merged ports: external port of component 0, then of component 1
    order = [port_map.index((x.comp, x.port)) for x in g.externals]
    mono = mono.reordered(order)
    errors = {}
    for M in modes:
        maps = []
        for j, imap in enumerate(full):
            counts = list(imap.counts)
            counts[itf.port_a if j == itf.a else itf.port_b] = M
            maps.append(imap.truncated(counts))
        merged = merge_pair(maps[0], maps[1], InterfaceCoupling(itf.port_a, itf.port_b, M))
        errors[M] = float(np.max(np.abs(merged.matrix - mono.matrix)))
    return errors


# ---------------------------------------------------------------------------
# fits used by the sweep and benchmark reports


def fit_log_slope(x, err, floor: float = 0.0):
    """Least-squares slope of ``ln(err)`` against ``x`` and the decades spanned.

    Points at or below ``floor`` are left out.  Returns ``(slope, decades, n_used)``.
    """
    x = np.asarray(x, dtype=float)
    e = np.asarray(err, dtype=float)
    keep = e > floor
    if keep.sum() < 2:
        return math.nan, 0.0, int(keep.sum())
    slope = np.polyfit(x[keep], np.log(e[keep]), 1)[0]
    decades = float(np.log10(e[keep].max() / e[keep].min()))
    return float(slope), decades, int(keep.sum())


def scaling_exponent(n, seconds) -> float:
    """Exponent ``p`` of a least-squares fit ``seconds ~ n^p``."""
    return float(np.polyfit(np.log(np.asarray(n, dtype=float)), np.log(np.asarray(seconds, dtype=float)), 1)[0])

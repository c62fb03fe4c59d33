"""Boundary integral solvers for one component.

Dirichlet walls
    Representation ``u = 2 S[mu] - 2 (D + ik/2 S)[sigma] - 2 D_img[sigma_img]``
    with ``mu`` on the ports, ``sigma`` on the walls and ``sigma_img`` the
    copy of ``sigma`` carried by the mirror images of the walls flanking each
    port.  Port rows impose ``du/dn + i eta u = f``; wall rows impose
    ``u = g``.  The jump relations turn the ``2 S'`` and ``-2 D`` limits into
    identities.

Neumann walls
    Representation ``u = 2 S[mu]`` on the whole boundary with rows
    ``du/dn + i eta(x) u = f``, where ``eta(x)`` is ``eta`` on ports and 0 on
    walls.

Unknowns are the densities at the panel nodes, scaled by the square root of
the quadrature weight.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry.panels import NODES_PER_PANEL, Discretization
from .modal import DIRICHLET, NEUMANN, basis_matrix
from .potentials.quadrature import NEAR_FACTOR, SourceSet, TargetSet, apply_operator, build_matrix

DEFAULT_ETA = -0.2
FREDHOLM_ETA_BOUND = (math.sqrt(2.0) - 1.0) / 2.0

# row types
ROW_PORT, ROW_WALL, ROW_VALUE, ROW_DERIV = 0, 1, 2, 3
# column types
COL_PORT, COL_WALL, COL_IMAGE = 0, 1, 2


# Above this size the dense matrix is factorized in place and not kept (no residual check).
KEEP_MATRIX_MAX = 6000


class EtaRangeWarning(UserWarning):
    """The impedance parameter lies outside the range covered by the theory."""


class SingularSystemError(np.linalg.LinAlgError):
    def __init__(self, message, null_vector=None):
        super().__init__(message)
        self.null_vector = null_vector


def check_eta(eta, bc: str) -> complex:
    eta = complex(eta)
    if eta.real >= 0:
        warnings.warn(f"Re(eta) = {eta.real} >= 0: the glue system may be singular", EtaRangeWarning, stacklevel=3)
    if bc == DIRICHLET and abs(eta) >= FREDHOLM_ETA_BOUND:
        warnings.warn(
            f"|eta| = {abs(eta):.4g} exceeds (sqrt(2)-1)/2; Fredholm property not guaranteed",
            EtaRangeWarning,
            stacklevel=3,
        )
    return eta


def _coefficients(bc: str, eta: complex, k: float) -> np.ndarray:
    """Coefficient table ``coef[row, col] = (S, D, S', D')`` weights (identity excluded)."""
    c = np.zeros((4, 3, 4), dtype=complex)
    ik = 1j * k
    if bc == DIRICHLET:
        # port rows: (d/dn + i eta) applied to the representation
        c[ROW_PORT, COL_PORT] = (2j * eta, 0, 2, 0)
        c[ROW_PORT, COL_WALL] = (-1j * eta * ik, -2j * eta, -ik, -2)
        c[ROW_PORT, COL_IMAGE] = (0, -2j * eta, 0, -2)
        # wall rows and field values: the representation itself
        for row in (ROW_WALL, ROW_VALUE):
            c[row, COL_PORT] = (2, 0, 0, 0)
            c[row, COL_WALL] = (-ik, -2, 0, 0)
            c[row, COL_IMAGE] = (0, -2, 0, 0)
        # derivative along the target normal
        c[ROW_DERIV, COL_PORT] = (0, 0, 2, 0)
        c[ROW_DERIV, COL_WALL] = (0, 0, -ik, -2)
        c[ROW_DERIV, COL_IMAGE] = (0, 0, 0, -2)
    else:
        c[ROW_PORT, COL_PORT] = (2j * eta, 0, 2, 0)
        c[ROW_WALL, COL_PORT] = (0, 0, 2, 0)
        c[ROW_VALUE, COL_PORT] = (2, 0, 0, 0)
        c[ROW_DERIV, COL_PORT] = (0, 0, 2, 0)
    return c


def _sources(disc: Discretization, bc: str) -> SourceSet:
    npan = disc.n_panels
    col = np.arange(npan) * NODES_PER_PANEL
    if bc == NEUMANN:
        return SourceSet(disc.start, disc.end, disc.normals, col, np.zeros(npan, dtype=np.int64))
    ptype = np.where(disc.panel_is_port, COL_PORT, COL_WALL)
    ia, ib, inrm = disc.image_geometry()
    src = disc.image_source
    return SourceSet(
        np.concatenate([disc.start, ia]),
        np.concatenate([disc.end, ib]),
        np.concatenate([disc.normals, inrm]),
        np.concatenate([col, src * NODES_PER_PANEL]),
        np.concatenate([ptype, np.full(len(src), COL_IMAGE)]),
        np.concatenate([disc.panel_image_port, disc.image_port]),
    )


def _surface_targets(disc: Discretization, nodes: np.ndarray, row) -> TargetSet:
    nodes = np.asarray(nodes, dtype=np.int64)
    rows = np.broadcast_to(np.asarray(row, dtype=np.int64), nodes.shape).copy()
    return TargetSet(
        disc.nodes[nodes],
        disc.node_normals[nodes],
        disc.node_panel[nodes],
        nodes % NODES_PER_PANEL,
        rows,
        disc.node_port[nodes],
    )


@dataclass
class BieSystem:
    """Assembled and factorized boundary integral system of one component."""

    disc: Discretization
    bc: str
    eta: complex
    matrix: np.ndarray | None  # weight-scaled system matrix (not kept for large systems)
    lu: tuple
    sqrt_w: np.ndarray
    sources: SourceSet
    near_factor: float = NEAR_FACTOR
    rcond: float = float("nan")

    @property
    def k(self) -> float:
        return self.disc.comp.k

    @property
    def size(self) -> int:
        return self.lu[0].shape[0]

    @property
    def condition_estimate(self) -> float:
        return 1.0 / self.rcond if self.rcond > 0 else math.inf

    def coefficients(self) -> np.ndarray:
        return _coefficients(self.bc, self.eta, self.k)

    def layout(self) -> dict:
        """Row/column index ranges: port ``p`` -> node indices, plus ``"walls"``."""
        out = {p: self.disc.port_nodes(p) for p in range(len(self.disc.comp.ports))}
        out["walls"] = self.disc.wall_nodes()
        return out


def _assemble(disc: Discretization, bc: str, eta, near_factor: float) -> BieSystem:
    k = disc.comp.k
    coef = _coefficients(bc, eta, k)
    src = _sources(disc, bc)
    nodes = np.arange(disc.n_nodes)
    rows = np.where(disc.node_port >= 0, ROW_PORT, ROW_WALL)
    tgt = _surface_targets(disc, nodes, rows)
    A = build_matrix(k, tgt, src, coef, disc.n_nodes, near_factor)
    sw = np.sqrt(disc.weights)
    A *= sw[:, None]
    A /= sw[None, :]
    A[np.diag_indices_from(A)] += 1.0
    anorm = np.linalg.norm(A, 1)
    keep = disc.n_nodes <= KEEP_MATRIX_MAX
    lu = scipy.linalg.lu_factor(A, overwrite_a=not keep, check_finite=True)
    rcond, info = scipy.linalg.lapack.zgecon(lu[0], anorm, norm="1")
    if rcond < np.finfo(float).eps:
        if not keep:
            raise SingularSystemError(
                f"boundary integral system is numerically singular (rcond {rcond:.2e}); "
                "trapped mode or cutoff geometry?"
            )
        _, _, vh = np.linalg.svd(A)
        raise SingularSystemError(
            f"boundary integral system is numerically singular (rcond {rcond:.2e}); "
            "trapped mode or cutoff geometry?",
            vh[-1].conj() / sw,
        )
    return BieSystem(disc, bc, complex(eta), A if keep else None, lu, sw, src, near_factor, float(rcond))


def assemble_dirichlet(disc: Discretization, eta=DEFAULT_ETA, r=None, near_factor: float = NEAR_FACTOR) -> BieSystem:
    """Assemble and factorize the mixed Dirichlet/impedance system.

    ``r`` may be given to check it against the image radius used when the
    discretization was built.
    """
    if disc.comp.bc != DIRICHLET:
        raise ValueError("component is not a Dirichlet component")
    eta = check_eta(eta, DIRICHLET)
    if len(disc.comp.ports) and disc.n_images == 0:
        raise ValueError("Dirichlet assembly needs image curves; panelize with a positive image radius")
    if r is not None and not np.allclose(np.broadcast_to(r, len(disc.image_radius)), disc.image_radius):
        raise ValueError("discretization was built for a different image radius")
    return _assemble(disc, DIRICHLET, eta, near_factor)


def assemble_neumann(disc: Discretization, eta=DEFAULT_ETA, near_factor: float = NEAR_FACTOR) -> BieSystem:
    """Assemble and factorize the Neumann-wall system (piecewise constant impedance)."""
    if disc.comp.bc != NEUMANN:
        raise ValueError("component is not a Neumann component")
    eta = check_eta(eta, NEUMANN)
    return _assemble(disc, NEUMANN, eta, near_factor)


def assemble(disc: Discretization, eta=DEFAULT_ETA, near_factor: float = NEAR_FACTOR) -> BieSystem:
    if disc.comp.bc == DIRICHLET:
        return assemble_dirichlet(disc, eta, near_factor=near_factor)
    return assemble_neumann(disc, eta, near_factor=near_factor)


def solve(sys: BieSystem, rhs, check: bool = True) -> np.ndarray:
    """Densities (unscaled, one column per right-hand side) for nodal boundary data ``rhs``."""
    b = np.asarray(rhs, dtype=complex)
    if b.shape[0] != sys.size:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, system has {sys.size}")
    bs = b * (sys.sqrt_w if b.ndim == 1 else sys.sqrt_w[:, None])
    x = scipy.linalg.lu_solve(sys.lu, bs)
    if check and sys.matrix is not None:
        res = np.linalg.norm(sys.matrix @ x - bs) / max(np.linalg.norm(bs), np.finfo(float).tiny)
        if np.linalg.norm(bs) > 0 and res > 1e-10:
            warnings.warn(f"direct solve residual {res:.2e}", RuntimeWarning, stacklevel=2)
    return x / (sys.sqrt_w if b.ndim == 1 else sys.sqrt_w[:, None])


def port_rhs(sys: BieSystem, port: int, coefficients) -> np.ndarray:
    """Nodal right-hand side carrying ``sum_m f_m b_m`` on port ``port`` and zero elsewhere."""
    disc = sys.disc
    spec = disc.comp.ports[port]
    y, _, idx = disc.port_quadrature(port)
    c = np.asarray(coefficients, dtype=complex)
    rhs = np.zeros(disc.n_nodes, dtype=complex)
    rhs[idx] = basis_matrix(spec, c.size, y) @ c
    return rhs


def _evaluate(sys: BieSystem, targets: TargetSet, density) -> np.ndarray:
    return apply_operator(sys.k, targets, sys.sources, sys.coefficients(), density, sys.near_factor)


def boundary_values(sys: BieSystem, density, nodes=None):
    """``(u, du/dn)`` at boundary nodes from the on-surface limits of the representation.

    On Dirichlet walls only ``u`` is available (``du/dn`` would need the
    hypersingular self term) and ``du/dn`` is returned as NaN there.
    """
    disc = sys.disc
    nodes = np.arange(disc.n_nodes) if nodes is None else np.asarray(nodes)
    dens = np.asarray(density, dtype=complex)
    u = _evaluate(sys, _surface_targets(disc, nodes, ROW_VALUE), dens)
    du = _evaluate(sys, _surface_targets(disc, nodes, ROW_DERIV), dens)
    # jump terms: 2 S' -> +mu, -2 D -> +sigma (Dirichlet walls only)
    jump_du = dens[nodes] if dens.ndim == 1 else dens[nodes, :]
    if sys.bc == DIRICHLET:
        on_wall = disc.node_port[nodes] < 0
        jump_u = jump_du * (on_wall if dens.ndim == 1 else on_wall[:, None])
        u = u + jump_u
        mask = ~on_wall if dens.ndim == 1 else ~on_wall[:, None]
        du = np.where(mask, du + jump_du, np.nan)
    else:
        du = du + jump_du
    return u, du


def eval_impedance_trace(sys: BieSystem, density, port: int, sign: int = -1, count: int | None = None):
    """Modal coefficients of ``du/dn + sign * i eta u`` on port ``port``.

    ``sign = +1`` reproduces the imposed incoming data, ``sign = -1`` gives the
    outgoing data.  ``count`` defaults to the port's retained mode count.
    """
    disc = sys.disc
    spec = disc.comp.ports[port]
    y, w, idx = disc.port_quadrature(port)
    count = disc.mode_counts[port] if count is None else count
    u, du = boundary_values(sys, density, idx)
    trace = du + sign * 1j * sys.eta * u
    B = basis_matrix(spec, count, y)
    return (B * w[:, None]).T @ trace


@dataclass
class FieldResult:
    values: np.ndarray
    near_corner: np.ndarray  # quality flag: within one finest-panel length of a corner


def eval_field(sys: BieSystem, density, targets, direction=None) -> FieldResult:
    """Evaluate the representation (or its derivative along ``direction``) at interior targets."""
    disc = sys.disc
    pts = np.atleast_2d(np.asarray(targets, dtype=float))
    inside = disc.comp.contains(pts)
    if not np.all(inside):
        raise ValueError("field targets must lie strictly inside the component")
    if direction is None:
        tgt = TargetSet(pts, row=np.full(len(pts), ROW_VALUE))
    else:
        nrm = np.broadcast_to(np.asarray(direction, dtype=float), pts.shape)
        tgt = TargetSet(pts, nrm, row=np.full(len(pts), ROW_DERIV))
    vals = _evaluate(sys, tgt, np.asarray(density, dtype=complex))
    flag = disc.corner_distance(pts) < disc.min_panel_length()
    return FieldResult(vals, flag)

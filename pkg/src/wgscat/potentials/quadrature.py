"""Panel quadrature for layer potentials on straight 16-node Gauss-Legendre panels.

Each (target, source panel) pair falls into exactly one regime:

* self -- the target is a node of the panel.  Only the single layer is
  nonzero on a straight panel; it is integrated by splitting
  ``G = -(1/2pi) J0(kr) log r + smooth`` and applying product weights for
  ``log|t - t_i|``.
* near -- the target lies within ``near_factor`` panel lengths of the panel.
  The panel is cut at geometrically growing distances from the closest
  point so every piece is at least its own length away from the target;
  each piece gets a 16-point rule and the density is interpolated from the
  panel nodes.
* far -- the plain panel rule.

The assembly kernels take, for every source panel, a column offset and a
type, and for every target a row type; the coefficient table
``coef[row_type, col_type]`` holds the weights of (S, D, S', D') for that
pairing.  Image panels are ordinary source panels whose column offset points
at the unknowns of the panel they mirror.
"""

from __future__ import annotations

import math

import numba
import numpy as np
from numba import prange

from .hankel import EULER_GAMMA, j0_scalar
from .kernels import INV_2PI, kernel_values

NQ = 16
NEAR_FACTOR = 2.5
MAX_SPLIT = 64

GL_X, GL_W = np.polynomial.legendre.leggauss(NQ)


def _barycentric_weights(x):
    lam = np.ones_like(x)
    for j in range(x.size):
        lam[j] = 1.0 / np.prod(x[j] - np.delete(x, j))
    return lam / np.max(np.abs(lam))


def _legendre_q(n_max, x):
    """Legendre functions of the second kind Q_0..Q_{n_max} on (-1, 1)."""
    q = np.empty(n_max + 1)
    q[0] = 0.5 * math.log((1 + x) / (1 - x))
    if n_max >= 1:
        q[1] = x * q[0] - 1.0
    for n in range(1, n_max):
        q[n + 1] = ((2 * n + 1) * x * q[n] - n * q[n - 1]) / (n + 1)
    return q


def log_moments(t0, n_max=NQ - 1):
    """``M_n = int_{-1}^{1} log|t - t0| P_n(t) dt`` for ``n = 0..n_max``, ``|t0| < 1``."""
    m = np.empty(n_max + 1)
    m[0] = (1 - t0) * math.log(1 - t0) + (1 + t0) * math.log(1 + t0) - 2.0
    q = _legendre_q(n_max + 1, t0)
    for n in range(1, n_max + 1):
        m[n] = 2.0 / (2 * n + 1) * (q[n + 1] - q[n - 1])
    return m


def log_product_weights(x=GL_X, w=GL_W):
    """``L[i, j]`` with ``int log|t - x_i| phi(t) dt ~ sum_j L[i, j] phi(x_j)`` for smooth ``phi``."""
    n = x.size
    P = np.polynomial.legendre.legvander(x, n - 1)  # P[j, m] = P_m(x_j)
    scale = (2 * np.arange(n) + 1) / 2.0
    L = np.empty((n, n))
    for i in range(n):
        mom = log_moments(x[i], n - 1)
        L[i] = (P * w[:, None]) @ (scale * mom)
    return L


GL_LAMBDA = _barycentric_weights(GL_X)
LOG_W = log_product_weights()


@numba.njit(cache=True)
def _interp_row(t, lam, xs, out):
    # barycentric Lagrange basis at t
    s = 0.0
    for j in range(xs.size):
        dt = t - xs[j]
        if dt == 0.0:
            for m in range(xs.size):
                out[m] = 0.0
            out[j] = 1.0
            return
        out[j] = lam[j] / dt
        s += out[j]
    for j in range(xs.size):
        out[j] /= s


@numba.njit(cache=True)
def _combo(k, c0, c1, c2, c3, dx, dy, nx0, nx1, ny0, ny1):
    g, dy_, dx_, dxy = kernel_values(k, dx, dy, nx0, nx1, ny0, ny1)
    return c0 * g + c1 * dy_ + c2 * dx_ + c3 * dxy


@numba.njit(cache=True)
def panel_weights(k, c0, c1, c2, c3, x0, x1, nx0, nx1, a0, a1, b0, b1, ny0, ny1, self_idx, near_factor,
                  gx, gw, lam, logw, out, tmp):
    """Fill ``out[j]`` so that the pairing contributes ``sum_j out[j] rho_j``."""
    ex = b0 - a0
    ey = b1 - a1
    ell = math.sqrt(ex * ex + ey * ey)
    h = 0.5 * ell
    ex /= ell
    ey /= ell
    cx = 0.5 * (a0 + b0)
    cy = 0.5 * (a1 + b1)
    n = gx.size
    for j in range(n):
        out[j] = 0.0

    if self_idx >= 0:
        # straight panel: D and S' vanish identically; S via the log split
        if c0 == 0.0:
            return
        ti = gx[self_idx]
        lh = math.log(h)
        for j in range(n):
            r = h * abs(gx[j] - ti)
            if k == 0.0:
                j0 = 1.0
                gs = 0.0 + 0.0j
            elif j == self_idx:
                j0 = 1.0
                gs = 0.25j - INV_2PI * (math.log(0.5 * k) + EULER_GAMMA)
            else:
                j0 = j0_scalar(k * r)
                g, _d1, _d2, _d3 = kernel_values(k, r, 0.0, 0.0, 0.0, 0.0, 0.0)
                gs = g + INV_2PI * j0 * math.log(r)
            out[j] = c0 * h * (-INV_2PI * logw[self_idx, j] * j0 + gw[j] * (-INV_2PI * j0 * lh + gs))
        return

    rx = x0 - cx
    ry = x1 - cy
    tc = (rx * ex + ry * ey) / h
    tp = (-rx * ey + ry * ex) / h
    if abs(tc) <= 1.0:
        ts = tc
        dist = abs(tp)
    else:
        ts = 1.0 if tc > 0 else -1.0
        dist = math.sqrt((abs(tc) - 1.0) ** 2 + tp * tp)

    if dist > 2.0 * near_factor:
        for j in range(n):
            yx = cx + h * gx[j] * ex
            yy = cy + h * gx[j] * ey
            out[j] = _combo(k, c0, c1, c2, c3, x0 - yx, x1 - yy, nx0, nx1, ny0, ny1) * (h * gw[j])
        return

    # near: geometric split around the closest point ts
    if dist < 1e-14:
        dist = 1e-14
    for side in range(2):
        sgn = 1.0 if side == 0 else -1.0
        lo = ts
        step = dist
        for _ in range(MAX_SPLIT):
            if sgn > 0 and lo >= 1.0:
                break
            if sgn < 0 and lo <= -1.0:
                break
            hi = lo + sgn * step
            if sgn > 0 and hi > 1.0:
                hi = 1.0
            if sgn < 0 and hi < -1.0:
                hi = -1.0
            mid = 0.5 * (lo + hi)
            half = 0.5 * abs(hi - lo)
            for q in range(n):
                t = mid + half * gx[q]
                yx = cx + h * t * ex
                yy = cy + h * t * ey
                val = _combo(k, c0, c1, c2, c3, x0 - yx, x1 - yy, nx0, nx1, ny0, ny1) * (h * half * gw[q])
                _interp_row(t, lam, gx, tmp)
                for j in range(n):
                    out[j] += val * tmp[j]
            lo = hi
            step *= 2.0


@numba.njit(cache=True, parallel=True)
def assemble_matrix(k, tx, tn, tpanel, tidx, trow, tport, pa, pb, pn, pcol, ptype, pimg, coef, near_factor,
                    ncols, gx, gw, lam, logw):
    """Dense matrix ``A[i, c]`` of all pairings (see module docstring).

    ``tpanel[i]``/``tidx[i]`` locate a target on its own panel (``-1`` for
    off-surface targets).  For a source panel whose image-port tag equals the
    target's port, the D' coefficient is dropped: the panel and its mirror
    image have exactly cancelling normal derivatives on that port line.
    """
    nt = tx.shape[0]
    npan = pa.shape[0]
    n = gx.size
    A = np.zeros((nt, ncols), dtype=np.complex128)
    for i in prange(nt):
        out = np.empty(n, dtype=np.complex128)
        tmp = np.empty(n)
        for p in range(npan):
            c0 = coef[trow[i], ptype[p], 0]
            c1 = coef[trow[i], ptype[p], 1]
            c2 = coef[trow[i], ptype[p], 2]
            c3 = coef[trow[i], ptype[p], 3]
            if pimg[p] >= 0 and pimg[p] == tport[i]:
                c3 = 0.0
            if c0 == 0.0 and c1 == 0.0 and c2 == 0.0 and c3 == 0.0:
                continue
            self_idx = tidx[i] if tpanel[i] == p else -1
            panel_weights(k, c0, c1, c2, c3, tx[i, 0], tx[i, 1], tn[i, 0], tn[i, 1], pa[p, 0], pa[p, 1],
                          pb[p, 0], pb[p, 1], pn[p, 0], pn[p, 1], self_idx, near_factor, gx, gw, lam, logw,
                          out, tmp)
            col = pcol[p]
            for j in range(n):
                A[i, col + j] += out[j]
    return A


@numba.njit(cache=True, parallel=True)
def apply_matrix_free(k, tx, tn, tpanel, tidx, trow, tport, pa, pb, pn, pcol, ptype, pimg, coef, near_factor,
                      rho, gx, gw, lam, logw):
    """``(A @ rho)`` for ``rho`` of shape ``(ncols, nrhs)`` without storing ``A``."""
    nt = tx.shape[0]
    npan = pa.shape[0]
    n = gx.size
    nrhs = rho.shape[1]
    res = np.zeros((nt, nrhs), dtype=np.complex128)
    for i in prange(nt):
        out = np.empty(n, dtype=np.complex128)
        tmp = np.empty(n)
        for p in range(npan):
            c0 = coef[trow[i], ptype[p], 0]
            c1 = coef[trow[i], ptype[p], 1]
            c2 = coef[trow[i], ptype[p], 2]
            c3 = coef[trow[i], ptype[p], 3]
            if pimg[p] >= 0 and pimg[p] == tport[i]:
                c3 = 0.0
            if c0 == 0.0 and c1 == 0.0 and c2 == 0.0 and c3 == 0.0:
                continue
            self_idx = tidx[i] if tpanel[i] == p else -1
            panel_weights(k, c0, c1, c2, c3, tx[i, 0], tx[i, 1], tn[i, 0], tn[i, 1], pa[p, 0], pa[p, 1],
                          pb[p, 0], pb[p, 1], pn[p, 0], pn[p, 1], self_idx, near_factor, gx, gw, lam, logw,
                          out, tmp)
            col = pcol[p]
            for r in range(nrhs):
                s = 0.0j
                for j in range(n):
                    s += out[j] * rho[col + j, r]
                res[i, r] += s
    return res


class SourceSet:
    """Straight source panels (possibly including mirror images) with column bookkeeping."""

    def __init__(self, start, end, normals, col, ptype, image_port=None):
        self.start = np.ascontiguousarray(start, dtype=float)
        self.end = np.ascontiguousarray(end, dtype=float)
        self.normals = np.ascontiguousarray(normals, dtype=float)
        self.col = np.ascontiguousarray(col, dtype=np.int64)
        self.ptype = np.ascontiguousarray(ptype, dtype=np.int64)
        if image_port is None:
            image_port = -np.ones(len(self.start), dtype=np.int64)
        self.image_port = np.ascontiguousarray(image_port, dtype=np.int64)


class TargetSet:
    """Targets with normals; on-surface targets record their panel and node index."""

    def __init__(self, points, normals=None, panel=None, index=None, row=None, port=None):
        self.points = np.ascontiguousarray(np.atleast_2d(points), dtype=float)
        nt = len(self.points)
        self.normals = np.ascontiguousarray(
            np.zeros((nt, 2)) if normals is None else np.atleast_2d(normals), dtype=float
        )
        self.panel = np.ascontiguousarray(-np.ones(nt, dtype=np.int64) if panel is None else panel, dtype=np.int64)
        self.index = np.ascontiguousarray(-np.ones(nt, dtype=np.int64) if index is None else index, dtype=np.int64)
        self.row = np.ascontiguousarray(np.zeros(nt, dtype=np.int64) if row is None else row, dtype=np.int64)
        self.port = np.ascontiguousarray(-np.ones(nt, dtype=np.int64) if port is None else port, dtype=np.int64)


def _args(k, targets: TargetSet, sources: SourceSet, coef):
    coef = np.ascontiguousarray(coef, dtype=np.complex128)
    if coef.ndim != 3 or coef.shape[2] != 4:
        raise ValueError("coefficient table must have shape (row types, column types, 4)")
    return (
        float(k),
        targets.points,
        targets.normals,
        targets.panel,
        targets.index,
        targets.row,
        targets.port,
        sources.start,
        sources.end,
        sources.normals,
        sources.col,
        sources.ptype,
        sources.image_port,
        coef,
    )


def build_matrix(k, targets: TargetSet, sources: SourceSet, coef, ncols: int, near_factor: float = NEAR_FACTOR):
    """Dense operator matrix from the panel quadrature (rows: targets, columns: unknowns)."""
    return assemble_matrix(*_args(k, targets, sources, coef), float(near_factor), int(ncols), GL_X, GL_W,
                           GL_LAMBDA, LOG_W)


def apply_operator(k, targets: TargetSet, sources: SourceSet, coef, rho, near_factor: float = NEAR_FACTOR,
                   chunk: int = 4096):
    """Matrix-free application to one or several density vectors."""
    rho = np.asarray(rho, dtype=np.complex128)
    squeeze = rho.ndim == 1
    rho2 = np.ascontiguousarray(rho.reshape(rho.shape[0], -1))
    args = _args(k, targets, sources, coef)
    out = np.empty((len(targets.points), rho2.shape[1]), dtype=np.complex128)
    for s in range(0, len(targets.points), chunk):
        sl = slice(s, s + chunk)
        sub = (args[0],) + tuple(a[sl] for a in args[1:7]) + args[7:]
        out[sl] = apply_matrix_free(*sub, float(near_factor), rho2, GL_X, GL_W, GL_LAMBDA, LOG_W)
    return out[:, 0] if squeeze else out


def apply_layer(kind, k, start, end, normals, density, targets, target_normals=None, on_surface=None,
                near_factor: float = NEAR_FACTOR):
    """Apply one layer potential, given by ``kind``, to densities sampled at the panel nodes.

    ``density`` has 16 values per panel in panel order.  ``on_surface`` may
    give ``(panel, node)`` indices for targets that are quadrature nodes.
    """
    from .kernels import KernelKind

    start = np.atleast_2d(start)
    npan = len(start)
    coef = np.zeros((1, 1, 4), dtype=complex)
    coef[0, 0, int(KernelKind(kind))] = 1.0
    src = SourceSet(start, end, normals, np.arange(npan) * NQ, np.zeros(npan, dtype=np.int64))
    panel = index = None
    if on_surface is not None:
        panel, index = on_surface
    tgt = TargetSet(targets, target_normals, panel, index)
    return apply_operator(k, tgt, src, coef, np.asarray(density), near_factor)

"""Helmholtz (and Laplace, k = 0) Green's function and its normal derivatives.

With ``d = x - y`` and ``r = |d|`` the kernels are

    G      = (i/4) H0(k r)                      (-(1/2pi) log r for k = 0)
    dG/dny = f(r) (d . ny)                      f(r) = (i k/4) H1(k r) / r
    dG/dnx = -f(r) (d . nx)
    d2G/dnx dny = f'(r) (d . nx)(d . ny) / r + f(r) (nx . ny)

and serve as the single layer (S), double layer (D), adjoint double layer
(S') and hypersingular (D') kernels.
"""

from __future__ import annotations

import enum
import math

import numba
import numpy as np

from .hankel import hankel01_scalar

INV_2PI = 1.0 / (2.0 * math.pi)


class KernelKind(enum.IntEnum):
    S = 0
    D = 1
    SP = 2
    DP = 3


@numba.njit(cache=True, inline="always")
def kernel_values(k, dx, dy, nx0, nx1, ny0, ny1):
    """Return ``(G, dG/dny, dG/dnx, d2G/dnx dny)`` for ``d = (dx, dy) = x - y``."""
    r2 = dx * dx + dy * dy
    r = math.sqrt(r2)
    dny = dx * ny0 + dy * ny1
    dnx = dx * nx0 + dy * nx1
    nn = nx0 * ny0 + nx1 * ny1
    if k == 0.0:
        g = complex(-INV_2PI * math.log(r), 0.0)
        f = complex(INV_2PI / r2, 0.0)
        fp = complex(-2.0 * INV_2PI / (r2 * r), 0.0)
    else:
        h0, h1 = hankel01_scalar(k * r)
        g = 0.25j * h0
        f = 0.25j * k * h1 / r
        fp = 0.25j * k * (k * h0 / r - 2.0 * h1 / r2)
    return g, f * dny, -f * dnx, fp * dnx * dny / r + f * nn


def kernel_eval(kind, k: float, x, nx, y, ny) -> complex:
    """Evaluate one kernel for a single target/source pair (``x != y``)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx = np.asarray(nx if nx is not None else (0.0, 0.0), dtype=float)
    ny = np.asarray(ny if ny is not None else (0.0, 0.0), dtype=float)
    d = x - y
    if d[0] == 0.0 and d[1] == 0.0:
        raise ValueError("kernel evaluated at coincident points")
    if k < 0:
        raise ValueError("wavenumber must be nonnegative")
    vals = kernel_values(float(k), d[0], d[1], nx[0], nx[1], ny[0], ny[1])
    return complex(vals[int(KernelKind(kind))])

"""Transverse mode bases of straight Dirichlet/Neumann channels.

A channel of width ``d`` carries modes ``exp(+-i beta_m x) b_m(y)`` with
``y`` in ``[-d/2, d/2]``:

    Dirichlet:  b_m = sqrt(2/d) sin(m pi (y + d/2) / d),        beta_m^2 = k^2 - (m pi/d)^2
    Neumann:    b_m = sqrt((2 - delta_m1)/d) cos((m-1) pi (y + d/2) / d),
                beta_m^2 = k^2 - ((m-1) pi/d)^2

Mode indices are 1-based.  The square-root branch puts evanescent modes on the
positive imaginary axis so that ``exp(i beta x)`` decays for ``x > 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
BC_KINDS = (DIRICHLET, NEUMANN)

CUTOFF_RTOL = 1e-12
DEFAULT_MAX_MODES = 512


class CutoffError(ValueError):
    """A mode sits at cutoff (beta ~ 0); perturb the width or wavenumber."""


class ModeCountWarning(UserWarning):
    """Mode selection hit its hard cap; the channel is too short for the tolerance."""


class QuadratureTooCoarse(ValueError):
    """A port quadrature rule cannot resolve the requested mode."""


@dataclass(frozen=True)
class PortSpec:
    """Cross-section of a straight channel together with its local frame.

    ``origin`` is the midpoint of the port segment, ``tangent`` runs along the
    cross-section (the transverse coordinate is ``(x - origin) . tangent``)
    and ``axis`` points along the channel away from the component that owns
    the port.
    """

    width: float
    bc: str
    k: float
    origin: tuple = (0.0, 0.0)
    tangent: tuple = (0.0, 1.0)
    axis: tuple = (1.0, 0.0)

    def __post_init__(self):
        if self.bc not in BC_KINDS:
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        if not (self.width > 0 and self.k > 0):
            raise ValueError("port width and wavenumber must be positive")
        if self.bc == DIRICHLET and self.k * self.width <= math.pi:
            raise ValueError(
                f"Dirichlet port needs k*d > pi for a propagating mode (k*d = {self.k * self.width:.6g})"
            )
        t = np.asarray(self.tangent, dtype=float)
        a = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(t) - 1) > 1e-12 or abs(np.linalg.norm(a) - 1) > 1e-12:
            raise ValueError("port tangent and axis must be unit vectors")
        if abs(t @ a) > 1e-12:
            raise ValueError("port tangent must be perpendicular to its axis")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "tangent", tuple(float(v) for v in t))
        object.__setattr__(self, "axis", tuple(float(v) for v in a))

    def transverse(self, points):
        """Transverse coordinate ``y`` of points lying on (or near) the port line."""
        p = np.asarray(points, dtype=float) - np.asarray(self.origin)
        return p @ np.asarray(self.tangent)

    def along_axis(self, points):
        """Signed distance of points from the port line, positive along ``axis``."""
        p = np.asarray(points, dtype=float) - np.asarray(self.origin)
        return p @ np.asarray(self.axis)

    def with_frame(self, origin, tangent, axis) -> "PortSpec":
        return PortSpec(self.width, self.bc, self.k, tuple(origin), tuple(tangent), tuple(axis))

    def flipped(self) -> "PortSpec":
        """The same cross-section seen from the other side (frame rotated by pi)."""
        t = -np.asarray(self.tangent)
        a = -np.asarray(self.axis)
        return PortSpec(self.width, self.bc, self.k, self.origin, tuple(t), tuple(a))


@dataclass(frozen=True)
class Mode:
    index: int
    beta: complex

    @property
    def kind(self) -> str:
        return "propagating" if self.beta.imag == 0 else "evanescent"


@dataclass
class ModeCoefficients:
    """Per-port coefficient blocks sharing one direction tag.

    ``direction`` is one of ``"incoming"`` (c_-), ``"outgoing"`` (c_+),
    ``"f"`` (incoming impedance data) or ``"g"`` (outgoing impedance data).
    """

    blocks: list
    direction: str = "incoming"
    sizes: list = field(init=False)

    def __post_init__(self):
        self.blocks = [np.asarray(b, dtype=complex).ravel() for b in self.blocks]
        self.sizes = [b.size for b in self.blocks]

    @classmethod
    def from_vector(cls, vec, sizes, direction="incoming"):
        vec = np.asarray(vec, dtype=complex).ravel()
        if vec.size != sum(sizes):
            raise ValueError(f"vector of length {vec.size} does not match block sizes {sizes}")
        splits = np.cumsum(sizes)[:-1]
        return cls(list(np.split(vec, splits)), direction)

    def vector(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros(0, dtype=complex)
        return np.concatenate(self.blocks)


def _transverse_wavenumber(spec: PortSpec, m):
    m = np.asarray(m)
    if np.any(m < 1):
        raise ValueError("mode indices are 1-based")
    order = m if spec.bc == DIRICHLET else m - 1
    return order * math.pi / spec.width


def beta(spec: PortSpec, m):
    """Propagation constant(s) of mode(s) ``m`` with ``Im beta >= 0``.

    Raises :class:`CutoffError` when ``|beta| < 1e-12 k``.
    """
    kt = _transverse_wavenumber(spec, m)
    b = np.sqrt(np.asarray(spec.k**2 - kt**2, dtype=complex))
    # principal sqrt of a negative real is +i|.|; of a positive real, positive real
    b = np.where(b.imag < 0, -b, b)
    if np.any(np.abs(b) < CUTOFF_RTOL * spec.k):
        raise CutoffError(f"mode at cutoff for width {spec.width!r}, k {spec.k!r}")
    return b[()] if b.ndim == 0 else b


def betas(spec: PortSpec, count: int) -> np.ndarray:
    """Propagation constants of modes ``1..count``."""
    return np.atleast_1d(beta(spec, np.arange(1, count + 1)))


def mode(spec: PortSpec, m: int) -> Mode:
    return Mode(int(m), complex(beta(spec, m)))


def basis_eval(spec: PortSpec, m, y):
    """Orthonormal transverse basis ``b_m(y)``; broadcasts over ``m`` and ``y``."""
    y = np.asarray(y, dtype=float)
    d = spec.width
    if np.any(np.abs(y) > d / 2 + 1e-12):
        raise ValueError("transverse coordinate outside the port")
    m = np.asarray(m)
    kt = _transverse_wavenumber(spec, m)
    s = y + d / 2
    if spec.bc == DIRICHLET:
        return math.sqrt(2.0 / d) * np.sin(kt * s)
    norm = np.where(m == 1, math.sqrt(1.0 / d), math.sqrt(2.0 / d))
    return norm * np.cos(kt * s)


def basis_matrix(spec: PortSpec, count: int, y) -> np.ndarray:
    """``B[i, m-1] = b_m(y_i)`` for ``m = 1..count``."""
    y = np.asarray(y, dtype=float)
    return basis_eval(spec, np.arange(1, count + 1)[None, :], y[:, None])


def parity(spec: PortSpec, count: int) -> np.ndarray:
    """Diagonal of the parity matrix: ``b_m(-y) = D_mm b_m(y)``."""
    m = np.arange(1, count + 1)
    if spec.bc == DIRICHLET:
        return (-1.0) ** (m + 1)
    return (-1.0) ** (m - 1)


def count_propagating(spec: PortSpec) -> int:
    """Number of modes with real propagation constant."""
    ratio = spec.k * spec.width / math.pi
    n = math.floor(ratio)
    if n == ratio:
        # exactly at cutoff; beta() would reject this mode
        n -= 1
    return n if spec.bc == DIRICHLET else n + 1


def select_mode_count(spec: PortSpec, length: float, eps: float, max_modes: int = DEFAULT_MAX_MODES) -> int:
    """Largest ``M`` with ``|exp(i beta_M L)| > eps``, never fewer than the propagating count."""
    if not length > 0:
        raise ValueError("channel length must be positive")
    if not 0 < eps < 1:
        raise ValueError("tolerance must lie in (0, 1)")
    m = count_propagating(spec)
    while m < max_modes:
        b = beta(spec, m + 1)
        if math.exp(-b.imag * length) > eps:
            m += 1
        else:
            return m
    warnings.warn(
        f"mode count capped at {max_modes} (width {spec.width}, length {length}, eps {eps})",
        ModeCountWarning,
        stacklevel=2,
    )
    return max_modes


def check_resolution(spec: PortSpec, panel_lengths, m: int, points_per_panel: int = 16) -> None:
    """Raise if some panel carries fewer than 8 nodes per half-wavelength of mode ``m``."""
    kt = float(_transverse_wavenumber(spec, m))
    if kt == 0:
        return
    half_waves = np.asarray(panel_lengths) * kt / math.pi
    if np.any(points_per_panel < 8 * half_waves):
        raise QuadratureTooCoarse(
            f"port quadrature too coarse for mode {m}: max panel length {np.max(panel_lengths):.4g}"
        )


def project_trace(spec: PortSpec, y, weights, u, dxu, m, panel_lengths=None):
    """Project traces on a port onto mode ``m``.

    ``y`` and ``weights`` are the transverse quadrature nodes and weights,
    ``u`` the field and ``dxu`` its derivative along the channel axis.
    Returns ``(P u, P' u, c_plus, c_minus)``.
    """
    if panel_lengths is not None:
        check_resolution(spec, panel_lengths, m)
    b = basis_eval(spec, m, y)
    w = np.asarray(weights, dtype=float)
    pu = np.sum(w * b * np.asarray(u))
    pdu = np.sum(w * b * np.asarray(dxu))
    bm = complex(beta(spec, m))
    c_plus = (pdu + 1j * bm * pu) / (2j * bm)
    c_minus = (-pdu + 1j * bm * pu) / (2j * bm)
    return pu, pdu, c_plus, c_minus


def synthesize(spec: PortSpec, c_plus, c_minus, y, x=0.0):
    """Field and axial derivative of ``sum (c+ e^{i b x} + c- e^{-i b x}) b_m(y)``."""
    c_plus = np.atleast_1d(np.asarray(c_plus, dtype=complex))
    c_minus = np.atleast_1d(np.asarray(c_minus, dtype=complex))
    n = max(c_plus.size, c_minus.size)
    bm = betas(spec, n)
    B = basis_matrix(spec, n, y)
    ep = np.exp(1j * bm * x)
    em = np.exp(-1j * bm * x)
    u = B @ (c_plus * ep + c_minus * em)
    du = B @ (1j * bm * (c_plus * ep - c_minus * em))
    return u, du

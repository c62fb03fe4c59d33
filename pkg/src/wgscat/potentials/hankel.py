"""Hankel functions of the first kind, orders 0 and 1, for real positive argument.

Three regimes are used:

* ``z < 2``: ascending power series for J and Y (no cancellation there).
* ``2 <= z < 25``: Miller backward recurrence for J_n, normalised by
  ``J_0 + 2 sum J_2k = 1``, with Neumann series for Y_0 and Y_1.
* ``z >= 25``: Hankel asymptotic expansion truncated at its smallest term.

Everything is written as scalar numba kernels so it can be inlined into the
layer-potential assembly loops.
"""

import math

import numba
import numpy as np

EULER_GAMMA = 0.57721566490153286061
TWO_OVER_PI = 2.0 / math.pi
SERIES_MAX = 2.0
ASYMPTOTIC_MIN = 25.0


@numba.njit(cache=True)
def _series(z):
    # J0, Y0, J1, Y1 from the ascending series; z < SERIES_MAX
    q = 0.25 * z * z
    half = 0.5 * z
    lg = math.log(half)

    j0 = 0.0
    s0 = 0.0  # sum psi(k+1) (-q)^k / k!^2
    j1 = 0.0
    s1 = 0.0  # sum (psi(k+1) + psi(k+2)) (-q)^k / (k! (k+1)!)
    t0 = 1.0  # (-q)^k / k!^2
    t1 = 1.0  # (-q)^k / (k! (k+1)!)
    psi_k1 = -EULER_GAMMA  # psi(k+1)
    for k in range(40):
        psi_k2 = psi_k1 + 1.0 / (k + 1)
        j0 += t0
        s0 += psi_k1 * t0
        j1 += t1
        s1 += (psi_k1 + psi_k2) * t1
        if abs(t0) < 1e-18 and k > 2:
            break
        t0 *= -q / ((k + 1) * (k + 1))
        t1 *= -q / ((k + 1) * (k + 2))
        psi_k1 = psi_k2
    j1 *= half
    y0 = TWO_OVER_PI * (lg * j0 - s0)
    y1 = -TWO_OVER_PI / z + TWO_OVER_PI * lg * j1 - half * s1 / math.pi
    return j0, y0, j1, y1


@numba.njit(cache=True)
def _miller(z):
    # J0, Y0, J1, Y1 by backward recurrence; SERIES_MAX <= z < ASYMPTOTIC_MIN
    nstart = 2 * int(0.5 * (z + 12.0 * z ** (1.0 / 3.0) + 24.0))
    jp1 = 0.0
    jn = 1e-30
    norm = 0.0  # J0 + 2 sum J_2k
    ysum0 = 0.0  # sum (-1)^k J_2k / k
    ysum1 = 0.0  # sum (-1)^k (J_{2k-1} - J_{2k+1}) / k
    j1 = 0.0
    j0 = 0.0
    for n in range(nstart, 0, -1):
        jm1 = 2.0 * n / z * jn - jp1
        # jn is J_n (unnormalised); jm1 is J_{n-1}
        if n % 2 == 0:
            kk = n // 2
            sgn = 1.0 if kk % 2 == 0 else -1.0
            norm += 2.0 * jn
            ysum0 += sgn * jn / kk
            # J_{2k-1} = jm1, J_{2k+1} = jp1
            ysum1 += sgn * (jm1 - jp1) / kk
        if n == 1:
            j1 = jn
            j0 = jm1
        jp1 = jn
        jn = jm1
        if abs(jn) > 1e250:
            scale = 1e-250
            jn *= scale
            jp1 *= scale
            norm *= scale
            ysum0 *= scale
            ysum1 *= scale
    norm += j0
    j0 /= norm
    j1 /= norm
    ysum0 /= norm
    ysum1 /= norm
    lg = math.log(0.5 * z) + EULER_GAMMA
    y0 = TWO_OVER_PI * lg * j0 - 2.0 * TWO_OVER_PI * ysum0
    y1 = TWO_OVER_PI * lg * j1 - TWO_OVER_PI * j0 / z + TWO_OVER_PI * ysum1
    return j0, y0, j1, y1


@numba.njit(cache=True)
def _asymptotic(z):
    # H0, H1 from the Hankel expansion; z >= ASYMPTOTIC_MIN
    s0 = 0.0 + 0.0j
    s1 = 0.0 + 0.0j
    a0 = 1.0
    a1 = 1.0
    ik = 1.0 + 0.0j
    zk = 1.0
    last0 = 1e300
    last1 = 1e300
    done0 = False
    done1 = False
    for k in range(60):
        if not done0:
            term = ik * a0 / zk
            if abs(term) > last0:
                done0 = True
            else:
                s0 += term
                last0 = abs(term)
                if last0 < 1e-18:
                    done0 = True
        if not done1:
            term = ik * a1 / zk
            if abs(term) > last1:
                done1 = True
            else:
                s1 += term
                last1 = abs(term)
                if last1 < 1e-18:
                    done1 = True
        if done0 and done1:
            break
        m = 2 * k + 1
        a0 *= -(m * m) / (8.0 * (k + 1))
        a1 *= (4.0 - m * m) / (8.0 * (k + 1))
        ik *= 1j
        zk *= z
    amp = math.sqrt(TWO_OVER_PI / z)
    c = math.cos(z)
    s = math.sin(z)
    # e^{i(z - pi/4)} and e^{i(z - 3pi/4)} without rounding the phase shift into z
    r2 = math.sqrt(0.5)
    e0 = complex((c + s) * r2, (s - c) * r2)
    e1 = complex((s - c) * r2, -(c + s) * r2)
    return amp * e0 * s0, amp * e1 * s1


@numba.njit(cache=True)
def hankel01_scalar(z):
    """Return ``(H0(z), H1(z))`` of the first kind for real ``z > 0``."""
    if z < SERIES_MAX:
        j0, y0, j1, y1 = _series(z)
        return complex(j0, y0), complex(j1, y1)
    if z < ASYMPTOTIC_MIN:
        j0, y0, j1, y1 = _miller(z)
        return complex(j0, y0), complex(j1, y1)
    return _asymptotic(z)


@numba.njit(cache=True)
def j0_scalar(z):
    """J0 for real ``z >= 0`` (used by the log-split self-panel rule)."""
    if z == 0.0:
        return 1.0
    if z < SERIES_MAX:
        return _series(z)[0]
    if z < ASYMPTOTIC_MIN:
        return _miller(z)[0]
    return _asymptotic(z)[0].real


@numba.njit(cache=True)
def _hankel01_array(z, h0, h1):
    for i in range(z.size):
        a, b = hankel01_scalar(z[i])
        h0[i] = a
        h1[i] = b


def _check_arg(z):
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise ValueError("Hankel functions require real z > 0")
    return z


def hankel0(z):
    """H_0^(1)(z) for real positive ``z`` (scalar or array)."""
    z = _check_arg(z)
    flat = np.ascontiguousarray(z.ravel())
    h0 = np.empty(flat.size, dtype=complex)
    h1 = np.empty(flat.size, dtype=complex)
    _hankel01_array(flat, h0, h1)
    out = h0.reshape(z.shape)
    return out[()] if out.ndim == 0 else out


def hankel1(z):
    """H_1^(1)(z) for real positive ``z`` (scalar or array)."""
    z = _check_arg(z)
    flat = np.ascontiguousarray(z.ravel())
    h0 = np.empty(flat.size, dtype=complex)
    h1 = np.empty(flat.size, dtype=complex)
    _hankel01_array(flat, h0, h1)
    out = h1.reshape(z.shape)
    return out[()] if out.ndim == 0 else out

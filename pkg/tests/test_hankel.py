import math

import mpmath
import numpy as np
import pytest
import scipy.special

from wgscat.potentials.hankel import hankel0, hankel01_scalar, hankel1, j0_scalar


def test_frozen_values_at_one():
    h0 = hankel0(1.0)
    assert h0.real == pytest.approx(0.7651976866, abs=1e-10)
    assert h0.imag == pytest.approx(0.0882569642, abs=1e-10)
    assert j0_scalar(1.0) == pytest.approx(0.7651976865579666, abs=1e-15)
    assert j0_scalar(0.0) == 1.0


def test_small_argument_log_slope():
    z1, z2 = 1e-10, 1e-12
    slope = (hankel0(z1).imag - hankel0(z2).imag) / math.log(z1 / z2)
    assert slope == pytest.approx(2 / math.pi, abs=1e-10)


def test_large_argument_magnitude():
    assert abs(hankel0(100.0)) == pytest.approx(math.sqrt(2 / (math.pi * 100)), rel=1e-3)


@pytest.mark.parametrize("z", [1e-8, 0.3, 1.999999, 2.0, 2.000001, 7.3, 24.99999, 25.0, 25.00001, 1e3, 1e4])
def test_against_mpmath_near_branch_switches(z):
    h0, h1 = hankel01_scalar(z)
    e0 = complex(mpmath.besselj(0, z) + 1j * mpmath.bessely(0, z))
    e1 = complex(mpmath.besselj(1, z) + 1j * mpmath.bessely(1, z))
    assert abs(h0 - e0) <= 1e-13 * abs(e0)
    assert abs(h1 - e1) <= 1e-13 * abs(e1)


def test_matches_scipy_on_grid():
    z = np.logspace(-6, 4, 2000)
    assert np.max(np.abs(hankel0(z) / scipy.special.hankel1(0, z) - 1)) < 1e-12
    assert np.max(np.abs(hankel1(z) / scipy.special.hankel1(1, z) - 1)) < 1e-12


def test_array_shapes_and_validation():
    z = np.linspace(0.5, 3, 6).reshape(2, 3)
    assert hankel0(z).shape == (2, 3)
    assert np.ndim(hankel1(2.0)) == 0
    for bad in (0.0, -1.0, np.nan):
        with pytest.raises(ValueError):
            hankel0(bad)

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wgscat.modal import (
    DIRICHLET,
    NEUMANN,
    CutoffError,
    ModeCoefficients,
    ModeCountWarning,
    PortSpec,
    QuadratureTooCoarse,
    basis_eval,
    basis_matrix,
    beta,
    betas,
    check_resolution,
    count_propagating,
    mode,
    parity,
    project_trace,
    select_mode_count,
    synthesize,
)

D_PI1 = PortSpec(math.pi + 1, DIRICHLET, 1.0)
N_PI1 = PortSpec(math.pi + 1, NEUMANN, 1.0)


def gauss(width, n=200):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * width * x, 0.5 * width * w


# frozen values from a 50-digit mpmath evaluation of sqrt(k^2 - (m pi / d)^2)
BETA1_D = 0.65161833876785805934
IM_BETA2_D = 1.1408655320964289182


def test_beta_frozen_values():
    assert beta(D_PI1, 1) == pytest.approx(BETA1_D, abs=1e-14)
    assert beta(D_PI1, 1).imag == 0
    assert beta(N_PI1, 1) == 1.0
    b2 = beta(D_PI1, 2)
    assert b2.real == 0 and b2.imag == pytest.approx(IM_BETA2_D, abs=1e-14)


def test_betas_branch_and_kind():
    b = betas(D_PI1, 20)
    assert np.all(b.imag >= 0)
    assert np.all((b.real == 0) | (b.imag == 0))
    assert mode(D_PI1, 1).kind == "propagating"
    assert mode(D_PI1, 3).kind == "evanescent"


def test_cutoff_raises():
    spec = PortSpec(2 * math.pi, DIRICHLET, 1.0)  # mode 2 sits exactly at cutoff
    with pytest.raises(CutoffError):
        beta(spec, 2)
    assert count_propagating(spec) == 1


def test_basis_trivial_values():
    d = D_PI1.width
    assert basis_eval(D_PI1, 1, -d / 2) == pytest.approx(0, abs=1e-15)
    assert basis_eval(D_PI1, 2, 0.0) == pytest.approx(0, abs=1e-15)
    assert np.allclose(basis_eval(N_PI1, 1, np.linspace(-d / 2, d / 2, 7)), math.sqrt(1 / d))
    with pytest.raises(ValueError):
        basis_eval(D_PI1, 1, d)
    with pytest.raises(ValueError):
        basis_eval(D_PI1, 0, 0.0)


def test_count_propagating():
    assert count_propagating(D_PI1) == 1
    assert count_propagating(N_PI1) == 2
    assert count_propagating(PortSpec(2 * math.pi + 0.1, DIRICHLET, 1.0)) == 2


def test_select_mode_count_cases():
    assert select_mode_count(D_PI1, 7.5, 1e-14) == 5
    assert select_mode_count(D_PI1, 7.5, 1 - 1e-12) == 1
    assert select_mode_count(N_PI1, 7.5, 1 - 1e-12) == 2
    assert select_mode_count(D_PI1, 1e4, 1e-14) == 1
    with pytest.raises(ValueError):
        select_mode_count(D_PI1, 0.0, 1e-14)
    with pytest.raises(ValueError):
        select_mode_count(D_PI1, 1.0, 1.5)


def test_select_mode_count_cap_warns():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert select_mode_count(D_PI1, 1e-6, 1e-14, max_modes=8) == 8
    assert any(issubclass(x.category, ModeCountWarning) for x in w)


def test_port_spec_validation():
    with pytest.raises(ValueError):
        PortSpec(3.0, DIRICHLET, 1.0)  # k d < pi: nothing propagates
    with pytest.raises(ValueError):
        PortSpec(4.0, "robin", 1.0)
    with pytest.raises(ValueError):
        PortSpec(4.0, NEUMANN, 1.0, tangent=(1.0, 0.0), axis=(1.0, 0.0))
    s = PortSpec(4.0, NEUMANN, 1.0, (1.0, 2.0), (0.0, 1.0), (1.0, 0.0))
    assert s.flipped().flipped() == s
    assert s.transverse([1.0, 3.0]) == pytest.approx(1.0)
    assert s.along_axis([3.0, 2.0]) == pytest.approx(2.0)


def test_parity_signs():
    assert list(parity(D_PI1, 4)) == [1, -1, 1, -1]
    assert list(parity(N_PI1, 4)) == [1, -1, 1, -1]  # (m-1) indexing keeps the constant mode even


@given(st.sampled_from([DIRICHLET, NEUMANN]), st.floats(3.3, 12.0), st.integers(1, 12))
def test_parity_matrix_property(bc, width, count):
    spec = PortSpec(width, bc, 1.0)
    y = np.linspace(-width / 2, width / 2, 11)
    B = basis_matrix(spec, count, y)
    Bf = basis_matrix(spec, count, -y)
    assert np.allclose(Bf, B * parity(spec, count)[None, :], atol=1e-12)


@given(st.sampled_from([DIRICHLET, NEUMANN]), st.floats(3.3, 12.0), st.integers(1, 15))
def test_gram_orthonormality(bc, width, count):
    spec = PortSpec(width, bc, 1.0)
    y, w = gauss(width)
    B = basis_matrix(spec, count, y)
    assert np.allclose((B * w[:, None]).T @ B, np.eye(count), atol=1e-12)


@given(st.sampled_from([DIRICHLET, NEUMANN]), st.floats(3.3, 8.0), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_modal_round_trip(bc, width, count, seed):
    spec = PortSpec(width, bc, 1.0)
    rng = np.random.default_rng(seed)
    cp = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    cm = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    y, w = gauss(width)
    u, dxu = synthesize(spec, cp, cm, y)
    for m in range(1, count + 1):
        _, _, p, q = project_trace(spec, y, w, u, dxu, m)
        assert p == pytest.approx(cp[m - 1], abs=1e-11)
        assert q == pytest.approx(cm[m - 1], abs=1e-11)


def test_project_trace_cases():
    y, w = gauss(D_PI1.width)
    b1 = complex(beta(D_PI1, 1))
    u = basis_eval(D_PI1, 1, y)
    pu, pdu, cp, cm = project_trace(D_PI1, y, w, u, 1j * b1 * u, 1)
    assert cp == pytest.approx(1, abs=1e-13) and cm == pytest.approx(0, abs=1e-13)
    res = project_trace(D_PI1, y, w, basis_eval(D_PI1, 2, y), 0 * y, 1)
    assert np.allclose(res, 0, atol=1e-14)
    _, _, cp, cm = project_trace(D_PI1, y, w, u, 0 * y, 1)  # cos(beta x) b_1 at x = 0
    assert cp == pytest.approx(0.5, abs=1e-13) and cm == pytest.approx(0.5, abs=1e-13)


def test_check_resolution():
    check_resolution(D_PI1, [1.0], 5)
    with pytest.raises(QuadratureTooCoarse):
        check_resolution(D_PI1, [4.0], 20)


def test_mode_coefficients_blocks():
    mc = ModeCoefficients.from_vector(np.arange(5), [2, 3], "f")
    assert mc.sizes == [2, 3] and mc.direction == "f"
    assert np.array_equal(mc.vector(), np.arange(5))
    assert ModeCoefficients([]).vector().size == 0
    with pytest.raises(ValueError):
        ModeCoefficients.from_vector(np.arange(4), [2, 3])

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import k0, k1

from services.kernel_service import KernelService, envelope_md
from utilities.dispersion import dirac, multilayer, power
from utilities.errors import KernelError
from utilities.green_symbol import GreenSymbol, cutoff_momentum, radial_rule
from utilities.planewave import IDENTITY, PAULI

momenta = st.tuples(
    st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
    st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
)


@pytest.fixture
def kernels(dirac_disp):
    return KernelService(dirac_disp)


@pytest.mark.parametrize(
    "r, d, expected",
    [(0.1, 1.0, 11.0), (0.5, 2.0, 1.0 + math.log(2.0)), (2.0, 1.0, 0.125), (0.25, 3.0, 1.25)],
)
def test_envelope_values(r, d, expected):
    assert envelope_md(r, d) == pytest.approx(expected, rel=1e-12)


def test_envelope_needs_positive_radius():
    with pytest.raises(KernelError):
        envelope_md(0.0, 1.0)


@given(momenta)
def test_green_symbol_inverts_the_shifted_symbol(p):
    for sign in (1, -1):
        symbol = GreenSymbol(dirac(), sign)
        assert np.allclose(symbol.inverse(p) @ symbol(p), IDENTITY, atol=1e-12)


def test_green_symbol_rejects_sign():
    with pytest.raises(KernelError):
        GreenSymbol(dirac(), 2)


@pytest.mark.parametrize("disp", [dirac(), power(2), multilayer(2)])
def test_green_symbol_decays_like_inverse_power(disp):
    assert GreenSymbol(disp).decay_constant() <= 2.0


def test_radial_rule_integrates_the_regulator():
    eps = 0.1
    rule = radial_rule(0.1, 2.0, eps)
    assert rule.nodes.max() <= cutoff_momentum(eps)
    assert set(np.unique(rule.region)) <= {0, 1, 2}
    # int_0^inf rho exp(-eps rho) d rho = 1 / eps^2
    assert np.dot(rule.weights, rule.nodes * np.exp(-eps * rule.nodes)) == pytest.approx(1 / eps ** 2, rel=1e-8)


def test_regulator_range(kernels):
    with pytest.raises(KernelError, match="regulator eps"):
        kernels.eval_kernel((1.0, 0.0), eps=1e-5)
    with pytest.raises(KernelError, match="regulator eps"):
        kernels.eval_kernel((1.0, 0.0), eps=2.0)


def test_zero_separation(kernels):
    with pytest.raises(KernelError, match="non-zero"):
        kernels.eval_kernel((0.0, 0.0), eps=1e-2)


def test_dirac_kernel_matches_bessel_form(kernels):
    delta = np.array([0.6, 0.8])
    sample = kernels.eval_kernel(delta, eps=1e-3)
    n_hat = np.array([0.6, 0.8, 0.0])
    expected = 1j * k0(1.0) * IDENTITY + 1j * k1(1.0) * np.einsum("l,lab->ab", n_hat, PAULI)
    assert np.linalg.norm(sample.value - expected) <= 5e-3 * np.linalg.norm(expected)
    assert sample.quadrature_error <= 1e-5


def test_symmetry_defects_dirac(kernels):
    defects = kernels.symmetry_defects((0.3, 0.2), eps=1e-2)
    assert defects["adjoint"] <= 1e-6
    assert defects["anti_hermitian"] <= 1e-6


def test_even_dispersion_has_no_antihermitian_check():
    defects = KernelService(multilayer(2)).symmetry_defects((0.3, -0.4), eps=1e-2)
    assert defects["adjoint"] <= 1e-6
    assert "anti_hermitian" not in defects


def test_free_resolvent_identity(kernels):
    assert kernels.free_resolvent_identity((0.25, 0.1), N=3) <= 1e-12
    assert kernels.free_resolvent_identity((0.5, 0.5), N=2, sign=-1) <= 1e-12


def test_decay_radii_range(kernels):
    with pytest.raises(KernelError, match="decay radii"):
        kernels.decay_report([1e-4, 0.1], eps=1e-3)


def test_dirac_short_range_slope(kernels):
    report = kernels.decay_report(np.geomspace(1e-3, 1e-1, 5), eps=1e-4)
    assert report.short_range_points == 5
    assert -1.2 <= report.short_range_slope <= -0.8
    assert report.log_ratio_spread is None


def test_quadratic_kernel_stays_bounded():
    report = KernelService(power(2)).decay_report([1e-3, 1e-2, 1e-1, 0.5], eps=1e-3)
    assert math.isfinite(report.sup_ratio)
    assert report.sup_ratio <= 5.0
    assert report.log_ratio_spread is not None


def test_epsilon_stability(kernels):
    assert kernels.epsilon_stability([0.2, 0.5, 1.0, 2.0], eps=1e-3) <= 0.01


def test_quadrature_failure_is_reported(dirac_disp):
    service = KernelService(dirac_disp, tol=1e-30, max_doublings=1)
    with pytest.raises(KernelError, match="did not converge"):
        service.eval_kernel((0.5, 0.0), eps=0.5)


@pytest.mark.slow
def test_dirac_tail_follows_envelope(kernels):
    report = kernels.decay_report([1.0, 2.0, 4.0, 8.0], eps=1e-3)
    assert report.tail_max_ratio <= 10.0 * report.tail_median_ratio
    assert all(e <= 1e-5 for e in report.errors)


@pytest.mark.slow
@pytest.mark.parametrize("m, k", [((0, 0), (0.0, 0.0)), ((1, 0), (0.25, 0.0)), ((0, 1), (0.1, -0.2))])
def test_lattice_sum_reproduces_symbol(kernels, m, k):
    assert kernels.fiber_kernel_identity(m, k) <= 0.01

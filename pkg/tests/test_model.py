import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from utilities.dispersion import dirac, multilayer, power
from utilities.errors import DispersionError, SpectralToolkitError
from utilities.model import (
    Params,
    certificate_lambdas,
    gap_constants,
    inf_check,
    inf_minimizer,
    inf_lower_bound,
    project_flux,
)

PLANE = np.eye(3)[:, :2]


def test_params_lambda():
    params = Params(alpha=0.1, beta=0.2)
    assert params.lam == pytest.approx(0.002, rel=1e-12)
    assert params.with_beta(0.4).lam == pytest.approx(0.004, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.0, -0.1, 0.6])
def test_params_reject_alpha(alpha):
    with pytest.raises(SpectralToolkitError, match="alpha must lie in"):
        Params(alpha=alpha, beta=0.1)


def test_params_reject_negative_beta():
    with pytest.raises(SpectralToolkitError, match="beta must be non-negative"):
        Params(alpha=0.1, beta=-1.0)


def test_params_allow_zero_beta():
    assert Params(alpha=0.5, beta=0.0).lam == 0.0


@pytest.mark.parametrize(
    "phi, parallel, perp",
    [
        ((0.0, 0.0, 1.0), (0.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
        ((0.0, 1.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 0.0)),
        ((1.0, 0.0, 1.0), (1.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
    ],
)
def test_project_flux_axis_vectors(phi, parallel, perp):
    flux = project_flux(phi, PLANE)
    assert np.allclose(flux.phi_par, parallel, atol=1e-15)
    assert np.allclose(flux.phi_perp, perp, atol=1e-15)


def test_project_flux_coordinate_plane():
    flux = project_flux((0.1, 0.2, 0.3), PLANE)
    assert np.allclose(flux.phi_par, (0.1, 0.2, 0.0), atol=1e-15)
    assert np.allclose(flux.phi_perp, (0.0, 0.0, 0.3), atol=1e-15)
    assert flux.norm_perp == pytest.approx(0.3)


def test_project_flux_tilted_plane():
    A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    A[:, 0] /= math.sqrt(2.0)
    flux = project_flux((1.0, 0.0, 0.0), A)
    assert np.allclose(flux.phi_par, (0.5, 0.0, 0.5), atol=1e-14)
    assert np.allclose(flux.phi_perp, (0.5, 0.0, -0.5), atol=1e-14)


def test_project_flux_zero():
    flux = project_flux((0.0, 0.0, 0.0), PLANE)
    assert flux.norm == 0.0
    assert flux.norm_perp == 0.0


def test_project_flux_rank_deficient():
    with pytest.raises(DispersionError, match="linearization not rank 2"):
        project_flux((0.0, 0.0, 1.0), np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]))


@given(
    st.lists(st.floats(min_value=-10.0, max_value=10.0, allow_nan=False), min_size=3, max_size=3),
    st.lists(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False), min_size=6, max_size=6),
)
def test_projection_properties(phi, entries):
    A = np.array(entries).reshape(3, 2)
    if np.linalg.svd(A, compute_uv=False)[-1] < 1e-3:
        return
    flux = project_flux(phi, A)
    assert np.allclose(flux.phi_par + flux.phi_perp, phi, atol=1e-12)
    assert abs(flux.phi_perp @ A[:, 0]) <= 1e-10 * (1 + np.linalg.norm(phi))
    assert abs(flux.phi_perp @ A[:, 1]) <= 1e-10 * (1 + np.linalg.norm(phi))
    again = project_flux(flux.phi_par, A)
    assert np.allclose(again.phi_par, flux.phi_par, atol=1e-12)


def test_gap_constants_dirac():
    constants = gap_constants(dirac(), project_flux((0.0, 0.0, 1.0), PLANE))
    assert constants.M == pytest.approx(1.5, rel=1e-12)
    assert math.isinf(constants.lambda0)
    assert constants.exactly_linear


def test_gap_constants_quadratic_power():
    constants = gap_constants(power(2), project_flux((0.0, 0.0, 1.0), PLANE))
    assert constants.M == pytest.approx(math.sqrt(1.5), rel=1e-12)
    assert math.isinf(constants.lambda0)


def test_gap_constants_defining_relation():
    flux = project_flux((1.0, 0.0, 1.0), PLANE)
    disp = dirac()
    constants = gap_constants(disp, flux)
    assert disp.K0_lower * constants.M ** disp.d - flux.norm == pytest.approx(flux.norm_perp / 2, rel=1e-12)


def test_gap_constants_finite_threshold_for_bilayer():
    constants = gap_constants(multilayer(2), project_flux((0.0, 0.0, 1.0), PLANE))
    assert 0.0 < constants.lambda0 < math.inf


def test_gap_constants_need_transverse_flux():
    with pytest.raises(SpectralToolkitError, match="no transverse flux"):
        gap_constants(dirac(), project_flux((1.0, 0.0, 0.0), PLANE))


def test_inf_at_zero_lambda():
    assert inf_check(dirac(), project_flux((0.0, 0.0, 1.0), PLANE), 0.0) == 0.0


def test_inf_transverse_flux():
    assert inf_check(dirac(), project_flux((0.0, 0.0, 1.0), PLANE), 0.01) == pytest.approx(0.01, rel=1e-9)


def test_inf_mixed_flux_and_minimizer():
    flux = project_flux((1.0, 0.0, 1.0), PLANE)
    value, p_star = inf_minimizer(dirac(), flux, 0.01)
    assert value == pytest.approx(0.01, rel=1e-6)
    assert np.allclose(p_star, (-0.01, 0.0), atol=1e-5)


def test_inf_rejects_negative_lambda():
    with pytest.raises(SpectralToolkitError):
        inf_check(dirac(), project_flux((0.0, 0.0, 1.0), PLANE), -0.1)


@pytest.mark.parametrize("phi", [(0.0, 0.0, 1.0), (0.3, -0.2, 0.5), (2.0, 1.0, 0.1)])
@pytest.mark.parametrize("disp", [dirac(), power(2)])
def test_inf_respects_lower_bound(disp, phi):
    flux = project_flux(phi, disp.A)
    constants = gap_constants(disp, flux)
    for lam in certificate_lambdas(constants, count=6):
        assert inf_check(disp, flux, lam, n_radii=128, n_angles=64) >= inf_lower_bound(flux, lam) - 1e-12


def test_certificate_lambdas_range():
    constants = gap_constants(multilayer(2), project_flux((0.0, 0.0, 1.0), PLANE))
    lams = certificate_lambdas(constants, count=5)
    assert lams[0] == 0.0
    assert lams[-1] == pytest.approx(min(constants.lambda0, 1.0))
    assert len(certificate_lambdas(None)) == 20

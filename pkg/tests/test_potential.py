import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from utilities.errors import PotentialError
from utilities.potential import (
    CosineBump,
    DiskIndicator,
    Potential,
    SquareIndicator,
    TabulatedShape,
    flux_moments,
    gauss_legendre,
)

frequencies = st.tuples(
    st.floats(min_value=-3.0, max_value=3.0, allow_nan=False),
    st.floats(min_value=-3.0, max_value=3.0, allow_nan=False),
)


def test_square_flux():
    pot = Potential(SquareIndicator(1.0), (0.0, 0.0, 1.0))
    assert np.allclose(flux_moments(pot), [0.0, 0.0, 1.0])


def test_disk_flux():
    pot = Potential(DiskIndicator(0.25), (0.0, 0.0, 1.0))
    assert flux_moments(pot)[2] == pytest.approx(np.pi / 16, rel=1e-12)


def test_mixed_amplitudes():
    pot = Potential(SquareIndicator(1.0), (0.5, 0.0, 0.5))
    assert np.allclose(flux_moments(pot), [0.5, 0.0, 0.5])


def test_cosine_bump_flux():
    # integral of cos^4 over one period-half gives 3w/4 per axis
    bump = CosineBump(0.25)
    pot = Potential(bump, (1.0, 0.0, 0.0))
    assert flux_moments(pot)[0] == pytest.approx((3 * 0.25 / 4) ** 2, rel=1e-10)


def test_fourier_at_zero_is_flux():
    for shape in (SquareIndicator(0.5, (0.1, -0.2)), DiskIndicator(0.3), CosineBump(0.4)):
        pot = Potential(shape, (1.0, 2.0, 3.0))
        assert np.allclose(pot.fourier(np.zeros(2)), flux_moments(pot), atol=1e-12)


def test_square_sinc_value():
    pot = Potential(SquareIndicator(1.0), (0.0, 0.0, 1.0))
    assert pot.fourier((0.5, 0.0))[2].real == pytest.approx(2 / np.pi, rel=1e-12)


def test_square_outside_cell():
    with pytest.raises(PotentialError, match="escapes the unit cell"):
        SquareIndicator(0.6, (0.3, 0.0))


def test_disk_outside_cell():
    with pytest.raises(PotentialError):
        DiskIndicator(0.6)


def test_wrong_amplitude_count():
    with pytest.raises(PotentialError, match="exactly three"):
        Potential(SquareIndicator(1.0), (1.0, 0.0))


def test_tabulated_must_be_square():
    with pytest.raises(PotentialError):
        TabulatedShape(np.ones((2, 3)))


def test_indicator_flags():
    assert Potential(SquareIndicator(1.0), (0, 0, 1)).is_indicator
    assert Potential(DiskIndicator(0.5), (0, 0, 1)).is_indicator
    assert not Potential(CosineBump(0.5), (0, 0, 1)).is_indicator
    assert not Potential(TabulatedShape(np.ones((4, 4))), (0, 0, 1)).is_indicator


def test_scaled_potential():
    pot = Potential(SquareIndicator(1.0), (0.0, 1.0, 2.0)).scaled(0.5)
    assert np.allclose(flux_moments(pot), [0.0, 0.5, 1.0])


def test_gauss_legendre_integrates_cubic():
    nodes, weights = gauss_legendre(0.0, 2.0, 4)
    assert np.dot(weights, nodes ** 3) == pytest.approx(4.0, rel=1e-14)


@given(frequencies)
def test_uniform_table_matches_full_square(q):
    table = TabulatedShape(np.ones((6, 6)))
    square = SquareIndicator(1.0)
    q = np.asarray(q)
    assert abs(table.fourier(q) - square.fourier(q)) <= 1e-12


@given(frequencies)
def test_fourier_reality(q):
    # real profiles satisfy chi_hat(-q) = conj(chi_hat(q))
    q = np.asarray(q)
    for shape in (SquareIndicator(0.4, (0.2, 0.1)), DiskIndicator(0.2, (-0.1, 0.25)), CosineBump(0.3, (0.1, 0.0))):
        assert abs(shape.fourier(-q) - np.conj(shape.fourier(q))) <= 1e-12

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import j1

from utilities.errors import PotentialError, QuadratureError

logger = logging.getLogger(__name__)

HALF_CELL = 0.5
SUPPORT_SLACK = 1e-12
QUADRATURE_TOL = 1e-10


@lru_cache(maxsize=32)
def _legendre_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(a: float, b: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped onto [a, b]."""
    nodes, weights = _legendre_rule(int(order))
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * nodes, half * weights


def _check_inside_cell(center: np.ndarray, reach: float, what: str) -> None:
    if np.any(np.abs(center) + reach > HALF_CELL + SUPPORT_SLACK):
        raise PotentialError(
            f"{what} support escapes the unit cell",
            {"center": center.tolist(), "reach": reach},
        )


def _phase(q: np.ndarray, center: np.ndarray) -> np.ndarray:
    return np.exp(-2j * np.pi * (q @ center))


@dataclass(frozen=True, eq=False)
class SquareIndicator:
    side: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))

    indicator = True

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if not self.side > 0.0:
            raise PotentialError("square side must be positive", {"side": self.side})
        _check_inside_cell(self.center, 0.5 * self.side, "square")

    def integral(self) -> float:
        return self.side ** 2

    def fourier(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        s = self.side
        # np.sinc(x) = sin(pi x)/(pi x)
        profile = s * np.sinc(q[..., 0] * s) * s * np.sinc(q[..., 1] * s)
        return profile * _phase(q, self.center)


@dataclass(frozen=True, eq=False)
class DiskIndicator:
    radius: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))

    indicator = True

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if not self.radius > 0.0:
            raise PotentialError("disk radius must be positive", {"radius": self.radius})
        _check_inside_cell(self.center, self.radius, "disk")

    def integral(self) -> float:
        return np.pi * self.radius ** 2

    def fourier(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        r = self.radius
        rho = np.linalg.norm(q, axis=-1)
        small = rho < 1e-14
        safe = np.where(small, 1.0, rho)
        profile = np.where(small, np.pi * r ** 2, r * j1(2.0 * np.pi * r * safe) / safe)
        return profile * _phase(q, self.center)


@dataclass(frozen=True, eq=False)
class CosineBump:
    """Separable C^3 bump prod_i cos^4(pi (y_i - c_i) / (2 w)) on |y_i - c_i| <= w.

    Moments and Fourier data come from Gauss-Legendre quadrature with an
    order-doubling convergence check.
    """

    half_width: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    order: int = 64

    indicator = False

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if not self.half_width > 0.0:
            raise PotentialError("bump half-width must be positive", {"half_width": self.half_width})
        if self.order < 2:
            raise PotentialError("quadrature order must be at least 2", {"order": self.order})
        _check_inside_cell(self.center, self.half_width, "bump")

    def _profile(self, t: np.ndarray) -> np.ndarray:
        return np.cos(0.5 * np.pi * t / self.half_width) ** 4

    def _axis_transform(self, q_axis: np.ndarray, order: int) -> np.ndarray:
        w = self.half_width
        nodes, weights = gauss_legendre(-w, w, order)
        kernel = np.exp(-2j * np.pi * np.multiply.outer(q_axis, nodes))
        return kernel @ (weights * self._profile(nodes))

    def _transform(self, q: np.ndarray, order: int) -> np.ndarray:
        return self._axis_transform(q[..., 0], order) * self._axis_transform(q[..., 1], order)

    def fourier(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        coarse = self._transform(q, self.order)
        fine = self._transform(q, 2 * self.order)
        scale = self.integral_at(2 * self.order)
        error = float(np.max(np.abs(fine - coarse), initial=0.0))
        if error > QUADRATURE_TOL * scale:
            raise QuadratureError(
                "bump Fourier quadrature did not converge",
                {"order": self.order, "difference": error},
            )
        return fine * _phase(q, self.center)

    def integral_at(self, order: int) -> float:
        nodes, weights = gauss_legendre(-self.half_width, self.half_width, order)
        return float(np.dot(weights, self._profile(nodes))) ** 2

    def integral(self) -> float:
        coarse = self.integral_at(self.order)
        fine = self.integral_at(2 * self.order)
        if abs(fine - coarse) > QUADRATURE_TOL * abs(fine):
            raise QuadratureError(
                "bump moment quadrature did not converge",
                {"order": self.order, "difference": abs(fine - coarse)},
            )
        return fine


@dataclass(frozen=True, eq=False)
class TabulatedShape:
    """Piecewise-constant profile on an n x n cell-centred grid over the unit cell.

    values[i, j] is the value on the cell centred at
    (-1/2 + (i + 1/2)/n, -1/2 + (j + 1/2)/n).
    """

    values: np.ndarray

    indicator = False

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] == 0:
            raise PotentialError("tabulated potential must be a non-empty square grid", {"shape": values.shape})
        if not np.all(np.isfinite(values)):
            raise PotentialError("tabulated potential must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def spacing(self) -> float:
        return 1.0 / self.values.shape[0]

    def centers(self) -> np.ndarray:
        n = self.values.shape[0]
        return -HALF_CELL + (np.arange(n) + 0.5) / n

    def integral(self) -> float:
        return float(self.values.sum() * self.spacing ** 2)

    def fourier(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        h = self.spacing
        y = self.centers()
        e1 = h * np.sinc(q[..., 0] * h)[..., None] * np.exp(-2j * np.pi * q[..., 0, None] * y)
        e2 = h * np.sinc(q[..., 1] * h)[..., None] * np.exp(-2j * np.pi * q[..., 1, None] * y)
        return np.einsum("...i,ij,...j->...", e1, self.values, e2)


@dataclass(frozen=True, eq=False)
class Potential:
    shape: object
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=float).reshape(-1)
        if amplitudes.shape != (3,):
            raise PotentialError("potential needs exactly three component amplitudes", {"given": amplitudes.size})
        if not np.all(np.isfinite(amplitudes)):
            raise PotentialError("potential amplitudes must be finite")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def is_indicator(self) -> bool:
        return bool(getattr(self.shape, "indicator", False))

    def fourier(self, q) -> np.ndarray:
        """(chi_hat_1(q), chi_hat_2(q), chi_hat_3(q)) with a trailing axis of length 3."""
        q = np.asarray(q, dtype=float)
        return self.shape.fourier(q)[..., None] * self.amplitudes

    def scaled(self, factor: float) -> "Potential":
        return Potential(self.shape, factor * self.amplitudes)


def flux_moments(pot: Potential) -> np.ndarray:
    """Phi_i = integral of chi_i over the unit cell."""
    return pot.amplitudes * pot.shape.integral()

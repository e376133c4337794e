import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from utilities.dispersion import Dispersion, check_rank, remainder_constant
from utilities.errors import SpectralToolkitError

logger = logging.getLogger(__name__)

EXACT_LINEAR_THRESHOLD = 1e-14


@dataclass(frozen=True)
class Params:
    """Scale alpha of the bumps, coupling beta, and the dispersion exponent d."""

    alpha: float
    beta: float
    d: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 0.5):
            raise SpectralToolkitError("alpha must lie in (0, 0.5]", {"alpha": self.alpha})
        if not self.beta >= 0.0:
            raise SpectralToolkitError("beta must be non-negative", {"beta": self.beta})
        if not self.d > 0.0:
            raise SpectralToolkitError("d must be positive", {"d": self.d})

    @property
    def lam(self) -> float:
        return self.alpha ** 2 * self.beta

    @property
    def d_prime(self) -> float:
        return min(self.d, 2.0)

    def with_beta(self, beta: float) -> "Params":
        return Params(self.alpha, beta, self.d)


@dataclass(frozen=True, eq=False)
class FluxDecomposition:
    phi: np.ndarray
    phi_par: np.ndarray
    phi_perp: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.phi))

    @property
    def norm_perp(self) -> float:
        return float(np.linalg.norm(self.phi_perp))


@dataclass(frozen=True)
class GapConstants:
    M: float
    K_rem: float
    lambda0: float

    @property
    def exactly_linear(self) -> bool:
        return math.isinf(self.lambda0)


def project_flux(phi, A) -> FluxDecomposition:
    """Split phi into its parts along Ran(A) and orthogonal to it."""
    phi = np.asarray(phi, dtype=float).reshape(3)
    A = np.asarray(A, dtype=float)
    check_rank(A)
    basis, _ = np.linalg.qr(A)
    phi_par = basis @ (basis.T @ phi)
    return FluxDecomposition(phi=phi, phi_par=phi_par, phi_perp=phi - phi_par)


def gap_constants(disp: Dispersion, flux: FluxDecomposition) -> GapConstants:
    perp = flux.norm_perp
    if perp <= EXACT_LINEAR_THRESHOLD * max(1.0, flux.norm):
        raise SpectralToolkitError("no transverse flux; gap certificate inapplicable", {"norm_perp": perp})
    d = disp.d
    M = ((flux.norm + 0.5 * perp) / disp.K0_lower) ** (1.0 / d)
    k_rem = remainder_constant(disp)
    if k_rem <= EXACT_LINEAR_THRESHOLD:
        lambda0 = math.inf
    else:
        lambda0 = (perp / (2.0 * k_rem * M ** (d + 1.0))) ** d
    logger.info(f"Gap constants for {disp.label}: M={M:.6g}, K_rem={k_rem:.3e}, lambda0={lambda0:.6g}")
    return GapConstants(M=M, K_rem=k_rem, lambda0=lambda0)


def _defining_radius(disp: Dispersion, flux: FluxDecomposition) -> float:
    return ((flux.norm + 0.5 * flux.norm_perp) / disp.K0_lower) ** (1.0 / disp.d)


def inf_minimizer(
    disp: Dispersion,
    flux: FluxDecomposition,
    lam: float,
    n_radii: int = 512,
    n_angles: int = 256,
    polish: bool = True,
) -> Tuple[float, np.ndarray]:
    """Minimum of |F(p) + lam * Phi| over a polar grid plus the origin, and its minimiser."""
    if lam < 0.0:
        raise SpectralToolkitError("lambda must be non-negative", {"lambda": lam})
    shift = lam * flux.phi
    origin = np.zeros(2)
    best_value = float(np.linalg.norm(disp(origin) + shift))
    best_p = origin
    if lam == 0.0:
        return best_value, best_p

    scale = lam ** (1.0 / disp.d)
    r_min = scale * 1e-3
    r_max = max(2.0 * _defining_radius(disp, flux) * scale, 10.0)
    radii = np.geomspace(r_min, r_max, n_radii)
    theta = 2.0 * np.pi * np.arange(n_angles) / n_angles
    p = radii[:, None, None] * np.stack([np.cos(theta), np.sin(theta)], axis=-1)[None, :, :]
    values = np.linalg.norm(disp(p) + shift, axis=-1)
    i, j = np.unravel_index(np.argmin(values), values.shape)
    if values[i, j] < best_value:
        best_value = float(values[i, j])
        best_p = p[i, j]

    if polish and best_value > 0.0:
        def objective(x: np.ndarray) -> float:
            return float(np.linalg.norm(disp(x) + shift))

        result = minimize(
            objective,
            best_p,
            method="Nelder-Mead",
            options={"xatol": 1e-12 * max(scale, 1e-300), "fatol": 1e-16, "maxiter": 2000},
        )
        if result.fun < best_value:
            best_value = float(result.fun)
            best_p = np.asarray(result.x, dtype=float)
    return best_value, best_p


def inf_check(
    disp: Dispersion,
    flux: FluxDecomposition,
    lam: float,
    n_radii: int = 512,
    n_angles: int = 256,
    polish: bool = True,
) -> float:
    value, _ = inf_minimizer(disp, flux, lam, n_radii=n_radii, n_angles=n_angles, polish=polish)
    return value


def inf_lower_bound(flux: FluxDecomposition, lam: float) -> float:
    """The certified lower bound lam * |Phi_perp| / 2 on the P0-block symbol."""
    return 0.5 * lam * flux.norm_perp


def certificate_lambdas(constants: Optional[GapConstants], count: int = 20) -> np.ndarray:
    """Sample points in [0, min(lambda0, 1)]."""
    upper = 1.0 if constants is None else min(constants.lambda0, 1.0)
    return np.linspace(0.0, upper, count)

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from utilities.dispersion import Dispersion
from utilities.errors import KernelError
from utilities.planewave import IDENTITY, pauli_dot
from utilities.potential import gauss_legendre

logger = logging.getLogger(__name__)

REGIONS = ("inner", "middle", "outer")
TAIL_LEVEL = 1e-12
MIDDLE_RATIO = 1.5


class GreenSymbol:
    """G(p) = (sigma . F(p) - sign * i)^(-1) for a dispersion F."""

    def __init__(self, disp: Dispersion, sign: int = 1):
        if sign not in (1, -1):
            raise KernelError("spectral sign must be +1 or -1", {"sign": sign})
        self.disp = disp
        self.sign = sign

    def __call__(self, p) -> np.ndarray:
        F = self.disp(np.asarray(p, dtype=float))
        denominator = 1.0 + np.sum(F * F, axis=-1)
        numerator = pauli_dot(F) + self.sign * 1j * IDENTITY
        return numerator / denominator[..., None, None]

    def inverse(self, p) -> np.ndarray:
        return pauli_dot(self.disp(np.asarray(p, dtype=float))) - self.sign * 1j * IDENTITY

    def decay_constant(self, radii: Optional[np.ndarray] = None, n_angles: int = 32) -> float:
        """max of |G(p)| <p>^d over a polar sample."""
        if radii is None:
            radii = np.logspace(-3, 3, 121)
        theta = 2.0 * np.pi * np.arange(n_angles) / n_angles
        p = radii[:, None, None] * np.stack([np.cos(theta), np.sin(theta)], axis=-1)[None]
        norms = np.linalg.norm(self(p), ord=2, axis=(-2, -1))
        bracket = np.sqrt(1.0 + radii ** 2)[:, None]
        return float(np.max(norms * bracket ** self.disp.d))

    def angular_coefficients(self, rho: np.ndarray, n_theta: int) -> np.ndarray:
        """Trapezoid Fourier coefficients g_n(rho) for n = fftfreq order.

        Returns shape (len(rho), n_theta, 2, 2).
        """
        theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        p = rho[:, None, None] * np.stack([np.cos(theta), np.sin(theta)], axis=-1)[None]
        return np.fft.fft(self(p), axis=1) / n_theta

    def harmonic_content(
        self, rho_max: float, tol: float = 1e-13, start: int = 8, limit: int = 1024
    ) -> Tuple[int, np.ndarray]:
        """Angular sample count and the harmonic orders carrying weight.

        The sample count doubles until the retained coefficients agree between
        successive counts on a log-spaced set of radii.
        """
        sample_radii = np.geomspace(1e-3, max(rho_max, 1e-2), 48)
        n_theta = start
        coarse = self.angular_coefficients(sample_radii, n_theta)
        while n_theta < limit:
            fine = self.angular_coefficients(sample_radii, 2 * n_theta)
            orders_coarse = np.fft.fftfreq(n_theta, 1.0 / n_theta).astype(int)
            orders_fine = np.fft.fftfreq(2 * n_theta, 1.0 / (2 * n_theta)).astype(int)
            lookup = {n: i for i, n in enumerate(orders_fine)}
            matched = fine[:, [lookup[n] for n in orders_coarse]]
            scale = float(np.max(np.abs(fine)))
            if np.max(np.abs(matched - coarse)) <= tol * scale:
                weight = np.max(np.abs(fine), axis=(0, 2, 3))
                keep = weight > tol * scale
                return 2 * n_theta, orders_fine[keep]
            n_theta *= 2
            coarse = fine
        raise KernelError("angular harmonic expansion did not converge", {"n_theta": n_theta})


def cutoff_momentum(eps: float) -> float:
    """|p| beyond which exp(-eps <p>) drops below the tail level."""
    bracket = math.log(1.0 / TAIL_LEVEL) / eps
    return math.sqrt(max(bracket ** 2 - 1.0, 0.0))


@dataclass(frozen=True, eq=False)
class RadialRule:
    nodes: np.ndarray
    weights: np.ndarray
    region: np.ndarray

    @property
    def size(self) -> int:
        return int(self.nodes.size)


def _uniform_edges(a: float, b: float, width: float) -> np.ndarray:
    count = max(1, int(math.ceil((b - a) / width)))
    return np.linspace(a, b, count + 1)


def _panels(edges: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(-1.0, 1.0, order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def radial_rule(r_small: float, r_large: float, eps: float, level: int = 0, order: int = 16) -> RadialRule:
    """Composite Gauss-Legendre rule on [0, rho_max] split at |p| = 1 and |p| = 1/r.

    Panels never exceed half an oscillation period pi / r_large, and every
    refinement level halves all panels.
    """
    rho_max = cutoff_momentum(eps)
    refine = 2 ** level
    width = math.pi / r_large / refine

    inner_end = min(1.0, rho_max)
    middle_end = min(max(1.0, 1.0 / r_small), rho_max)
    pieces = [("inner", _uniform_edges(0.0, inner_end, min(width, 0.25 / refine)))]
    if middle_end > inner_end:
        count = max(1, int(math.ceil(math.log(middle_end / inner_end) / math.log(MIDDLE_RATIO)))) * refine
        coarse = np.geomspace(inner_end, middle_end, count + 1)
        edges = [coarse[0]]
        for a, b in zip(coarse[:-1], coarse[1:]):
            edges.extend(_uniform_edges(a, b, width)[1:])
        pieces.append(("middle", np.asarray(edges)))
    if rho_max > middle_end:
        pieces.append(("outer", _uniform_edges(middle_end, rho_max, width)))

    nodes, weights, region = [], [], []
    for name, edges in pieces:
        x, w = _panels(edges, order)
        nodes.append(x)
        weights.append(w)
        region.append(np.full(x.size, REGIONS.index(name)))
    return RadialRule(np.concatenate(nodes), np.concatenate(weights), np.concatenate(region))

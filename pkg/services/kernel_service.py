import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import jv

from utilities.dispersion import Dispersion
from utilities.errors import KernelError
from utilities.fitting import loglog_fit
from utilities.green_symbol import REGIONS, GreenSymbol, cutoff_momentum, radial_rule
from utilities.parallel import parallel_map
from utilities.planewave import assemble_free, basis_set
from utilities.potential import gauss_legendre

logger = logging.getLogger(__name__)

CHUNK = 4_096
SHORT_RANGE = (1e-3, 1e-1)


@dataclass(frozen=True, eq=False)
class KernelSample:
    r: float
    eps: float
    value: np.ndarray
    quadrature_error: float
    delta: Tuple[float, float] = (0.0, 0.0)
    sign: int = 1

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.value, ord=2))


@dataclass
class DecayReport:
    radii: List[float] = field(default_factory=list)
    magnitudes: List[float] = field(default_factory=list)
    envelopes: List[float] = field(default_factory=list)
    errors: List[float] = field(default_factory=list)
    eps: float = 1e-3
    short_range_slope: float = float("nan")
    short_range_points: int = 0
    sup_ratio: float = float("nan")
    tail_median_ratio: float = float("nan")
    tail_max_ratio: float = float("nan")
    log_ratio_spread: Optional[Tuple[float, float]] = None

    @property
    def ratios(self) -> List[float]:
        return [m / e for m, e in zip(self.magnitudes, self.envelopes)]


def envelope_md(r: float, d: float) -> float:
    """Pointwise kernel envelope M_d(r); the short-range branch covers r <= 1."""
    if r <= 0.0:
        raise KernelError("envelope needs r > 0", {"r": r})
    if r > 1.0:
        return r ** -3
    if d == 2.0:
        return -math.log(r) + 1.0
    return r ** (d - 2.0) + 1.0


@dataclass(frozen=True, eq=False)
class KernelHarmonics:
    """Radial functions kappa_n(r) with K(r, phi) = sum_n i^n e^{i n phi} kappa_n(r)."""

    radii: np.ndarray
    orders: np.ndarray
    kappa: np.ndarray
    errors: np.ndarray
    worst_region: str

    def value(self, index: int, phi: float) -> np.ndarray:
        phases = (1j ** self.orders) * np.exp(1j * self.orders * phi)
        return np.einsum("n,nab->ab", phases, self.kappa[index])


class KernelService:
    def __init__(
        self,
        disp: Dispersion,
        threads: int = 1,
        tol: float = 1e-6,
        max_doublings: int = 14,
        order: int = 16,
    ):
        self.disp = disp
        self.threads = max(1, int(threads))
        self.tol = tol
        self.max_doublings = max_doublings
        self.order = order

    @staticmethod
    def _check_eps(eps: float) -> None:
        if not (1e-4 <= eps <= 1.0):
            raise KernelError("regulator eps must lie in [1e-4, 1]", {"eps": eps})

    def _integrate(self, symbol: GreenSymbol, orders: np.ndarray, n_theta: int, radii: np.ndarray,
                   eps: float, level: int) -> np.ndarray:
        """Per-region kappa_n(r) contributions, shape (3, n_r, n_orders, 2, 2)."""
        rule = radial_rule(float(radii.min()), float(radii.max()), eps, level=level, order=self.order)
        all_orders = np.fft.fftfreq(n_theta, 1.0 / n_theta).astype(int)
        columns = [int(np.flatnonzero(all_orders == n)[0]) for n in orders]
        result = np.zeros((len(REGIONS), radii.size, orders.size, 2, 2), dtype=complex)
        for start in range(0, rule.size, CHUNK):
            rho = rule.nodes[start:start + CHUNK]
            weight = rule.weights[start:start + CHUNK] * rho * np.exp(-eps * np.sqrt(1.0 + rho ** 2))
            region = rule.region[start:start + CHUNK]
            g = symbol.angular_coefficients(rho, n_theta)[:, columns]
            bessel = jv(orders[None, :, None], rho[:, None, None] * radii[None, None, :])
            for r_id in np.unique(region):
                mask = region == r_id
                result[r_id] += np.einsum(
                    "c,cnab,cnr->rnab", weight[mask], g[mask], bessel[mask]
                )
        return result

    def kernel_harmonics(self, radii: Sequence[float], eps: float, sign: int = 1) -> KernelHarmonics:
        radii = np.asarray(radii, dtype=float)
        if np.any(radii <= 0.0):
            raise KernelError("kernel separations must be positive")
        self._check_eps(eps)
        symbol = GreenSymbol(self.disp, sign)
        n_theta, orders = symbol.harmonic_content(cutoff_momentum(eps))
        previous = self._integrate(symbol, orders, n_theta, radii, eps, level=0)
        scale = np.array([envelope_md(r, self.disp.d) for r in radii])
        for level in range(1, self.max_doublings + 1):
            current = self._integrate(symbol, orders, n_theta, radii, eps, level=level)
            kappa = current.sum(axis=0)
            region_error = np.max(np.abs(current - previous), axis=(2, 3, 4))
            error = region_error.sum(axis=0)
            magnitude = np.max(np.abs(kappa), axis=(1, 2, 3))
            if np.all(error <= self.tol * (magnitude + scale)):
                worst = REGIONS[int(np.argmax(region_error.max(axis=1)))]
                return KernelHarmonics(radii, orders, kappa, error, worst)
            previous = current
        worst = REGIONS[int(np.argmax(region_error.max(axis=1)))]
        raise KernelError(
            "kernel quadrature did not converge",
            {"region": worst, "doublings": self.max_doublings, "eps": eps},
        )

    def eval_kernel(self, delta, eps: float, sign: int = 1) -> KernelSample:
        """K_eps(delta) = (1/2 pi) int e^{i p.delta} G(p) e^{-eps <p>} dp."""
        delta = np.asarray(delta, dtype=float).reshape(2)
        r = float(np.linalg.norm(delta))
        if r <= 0.0:
            raise KernelError("kernel separation must be non-zero")
        harmonics = self.kernel_harmonics([r], eps, sign)
        phi = math.atan2(delta[1], delta[0])
        return KernelSample(
            r=r,
            eps=eps,
            value=harmonics.value(0, phi),
            quadrature_error=float(harmonics.errors[0]),
            delta=(float(delta[0]), float(delta[1])),
            sign=sign,
        )

    def decay_report(self, radii: Sequence[float], eps: float) -> DecayReport:
        radii = [float(r) for r in radii]
        if any(r < 1e-3 or r > 16.0 for r in radii):
            raise KernelError("decay radii must lie in [1e-3, 16]")
        samples = parallel_map(lambda r: self.eval_kernel((r, 0.0), eps), radii, self.threads)
        report = DecayReport(eps=eps)
        for r, sample in zip(radii, samples):
            report.radii.append(r)
            report.magnitudes.append(sample.magnitude)
            report.envelopes.append(envelope_md(r, self.disp.d))
            report.errors.append(sample.quadrature_error)

        ratios = np.array(report.ratios)
        report.sup_ratio = float(ratios.max()) if ratios.size else float("nan")
        radii_array = np.array(report.radii)
        magnitudes = np.array(report.magnitudes)
        short = (radii_array >= SHORT_RANGE[0]) & (radii_array <= SHORT_RANGE[1])
        fit = loglog_fit(radii_array[short], magnitudes[short])
        report.short_range_slope = fit.slope
        report.short_range_points = fit.points
        tail = ratios[radii_array >= 1.0]
        if tail.size:
            report.tail_median_ratio = float(np.median(tail))
            report.tail_max_ratio = float(tail.max())
        if self.disp.d == 2.0 and np.any(short & (radii_array < 1.0)):
            log_ratio = magnitudes[short] / -np.log(radii_array[short])
            report.log_ratio_spread = (float(log_ratio.min()), float(log_ratio.max()))
        logger.info(
            f"Kernel decay for {self.disp.label}: short-range slope {report.short_range_slope:.4f}, "
            f"sup |K|/M_d {report.sup_ratio:.4e}"
        )
        return report

    def epsilon_stability(self, radii: Sequence[float], eps: float, factor: float = 0.5) -> float:
        """Largest relative change of K when eps is multiplied by factor."""
        radii = np.asarray(radii, dtype=float)
        coarse = self.kernel_harmonics(radii, eps)
        fine = self.kernel_harmonics(radii, eps * factor)
        change = 0.0
        for i in range(radii.size):
            a = coarse.value(i, 0.0)
            b = fine.value(i, 0.0)
            change = max(change, float(np.linalg.norm(a - b, ord=2) / np.linalg.norm(b, ord=2)))
        return change

    def symmetry_defects(self, delta, eps: float) -> Dict[str, float]:
        """Relative defects of K+(-delta)^H = K-(delta) and, for odd F, K+(delta)^H = -K+(delta)."""
        delta = np.asarray(delta, dtype=float)
        plus_reflected = self.eval_kernel(-delta, eps, sign=1).value
        minus = self.eval_kernel(delta, eps, sign=-1).value
        plus = self.eval_kernel(delta, eps, sign=1).value
        defects = {
            "adjoint": float(np.linalg.norm(plus_reflected.conj().T - minus) / np.linalg.norm(minus))
        }
        if self.disp.is_odd():
            defects["anti_hermitian"] = float(np.linalg.norm(plus.conj().T + plus) / np.linalg.norm(plus))
        return defects

    def free_resolvent_identity(self, k, N: int, sign: int = 1) -> float:
        """max over basis modes of |(h0_k - s i)^(-1) column - G(2 pi (m - k)) block|."""
        basis = basis_set(N)
        H = assemble_free(k, basis, self.disp)
        resolvent = np.linalg.inv(H.entries - sign * 1j * np.eye(basis.dim))
        symbol = GreenSymbol(self.disp, sign)
        blocks = symbol(2.0 * np.pi * (basis.indices - H.k))
        expected = np.zeros_like(resolvent)
        for i in range(basis.n_modes):
            expected[2 * i:2 * i + 2, 2 * i:2 * i + 2] = blocks[i]
        return float(np.max(np.abs(resolvent - expected)))

    def fiber_kernel_identity(
        self,
        m,
        k,
        eps: float = 0.05,
        lattice_range: int = 6,
        cell_order: int = 16,
        table_size: int = 160,
    ) -> float:
        """Relative mismatch between the lattice-summed kernel applied to Psi_m and G(2 pi (m - k)).

        The regularised kernel satisfies the identity with the factor
        exp(-eps <q>) on the right-hand side.
        """
        m = np.asarray(m, dtype=float).reshape(2)
        k = np.asarray(k, dtype=float).reshape(2)
        q = 2.0 * np.pi * (m - k)
        reach = math.sqrt(2.0) * (lattice_range + 0.5)
        table = self.kernel_harmonics(np.geomspace(1e-4, reach * 1.02, table_size), eps)
        log_r = np.log(table.radii)
        flat = (table.radii[:, None, None, None] * table.kappa).reshape(table.radii.size, -1)
        spline = CubicSpline(log_r, np.concatenate([flat.real, flat.imag], axis=1))
        half = flat.shape[1]

        def kernel(y: np.ndarray) -> np.ndarray:
            r = np.linalg.norm(y, axis=-1)
            phi = np.arctan2(y[..., 1], y[..., 0])
            packed = spline(np.log(r))
            r_kappa = (packed[..., :half] + 1j * packed[..., half:]).reshape(r.shape + table.kappa.shape[1:])
            phases = (1j ** table.orders) * np.exp(1j * np.multiply.outer(phi, table.orders))
            return np.einsum("...n,...nab->...ab", phases, r_kappa) / r[..., None, None]

        total = np.zeros((2, 2), dtype=complex)
        x, w = gauss_legendre(-0.5, 0.5, cell_order)
        cell_y = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)
        cell_w = np.outer(w, w).ravel()
        for g1 in range(-lattice_range, lattice_range + 1):
            for g2 in range(-lattice_range, lattice_range + 1):
                if g1 == 0 and g2 == 0:
                    continue
                y = cell_y + np.array([g1, g2], dtype=float)
                phase = np.exp(-1j * (y @ q))
                total += np.einsum("c,cab->ab", cell_w * phase, kernel(y))

        # central cell: four triangles with apex at the singular point
        t, wt = gauss_legendre(0.0, 1.0, 2 * cell_order)
        s, ws = gauss_legendre(0.0, 1.0, 2 * cell_order)
        corners = np.array([[0.5, -0.5], [0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5]])
        for a, b in zip(corners, np.roll(corners, -1, axis=0)):
            edge = b - a
            jacobian = abs(a[0] * edge[1] - a[1] * edge[0])
            base = a[None, :] + s[:, None] * edge[None, :]
            y = t[:, None, None] * base[None, :, :]
            weight = (wt[:, None] * t[:, None] * jacobian) * ws[None, :]
            phase = np.exp(-1j * (y @ q))
            total += np.einsum("ts,tsab->ab", weight * phase, kernel(y))

        total /= 2.0 * np.pi
        symbol = GreenSymbol(self.disp, 1)
        target = symbol(q) * math.exp(-eps * math.sqrt(1.0 + float(q @ q)))
        mismatch = float(np.linalg.norm(total - target, ord=2) / np.linalg.norm(target, ord=2))
        logger.info(f"Lattice-sum kernel identity m={tuple(m)}, k={tuple(k)}: relative mismatch {mismatch:.3e}")
        return mismatch

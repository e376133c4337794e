import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la

from utilities.dispersion import Dispersion
from utilities.errors import SolverError, SpectralToolkitError
from utilities.fitting import correction_constant, loglog_fit
from utilities.model import FluxDecomposition, Params, inf_minimizer, project_flux
from utilities.parallel import parallel_map
from utilities.planewave import (
    DEFAULT_MAX_DIM,
    FiberMatrix,
    assemble_fiber,
    basis_set,
    fold_to_cell,
)
from utilities.potential import Potential, flux_moments

logger = logging.getLogger(__name__)

WINDOW_HALF = 4
INCLUSION_SMALLNESS = 0.05


@dataclass(frozen=True, eq=False)
class BandStructure:
    kgrid: np.ndarray
    bands: np.ndarray
    cutoff: int
    n_k: int
    params: Params
    tags: Dict[str, str]
    n_seeded: int = 0

    @property
    def dim(self) -> int:
        return int(self.bands.shape[1])


@dataclass(frozen=True)
class GapReport:
    lower_edge: float
    upper_edge: float
    center: float
    width: float
    predicted_halfwidth_leading: float
    alpha: float
    beta: float
    d_prime: float
    norm_perp: float
    cutoff: int
    n_k: int
    touching: bool = False

    @property
    def lam(self) -> float:
        return self.alpha ** 2 * self.beta

    @property
    def ratio(self) -> Optional[float]:
        denominator = 2.0 * self.lam * self.norm_perp
        return self.width / denominator if denominator > 0.0 else None

    def predicted_halfwidth(self, C: float) -> float:
        """lam * (|Phi_perp|/2 - C alpha^d' beta)."""
        return self.lam * (0.5 * self.norm_perp - C * self.alpha ** self.d_prime * self.beta)

    def to_dict(self) -> Dict:
        report = asdict(self)
        report["ratio"] = self.ratio
        report["lambda"] = self.lam
        return report


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    beta: float
    N: int
    n_k: int
    width: float
    ratio: float
    runtime_s: float
    error: Optional[str] = None


@dataclass
class SweepResult:
    rows: List[SweepRow] = field(default_factory=list)
    alpha_slopes: Dict[float, float] = field(default_factory=dict)
    C_fit: float = float("nan")
    inclusion_violations: List[Tuple[float, float]] = field(default_factory=list)


@dataclass(frozen=True)
class KineticBoundReport:
    minimum: float
    bound: float
    k_argmin: Tuple[float, float]
    m_argmin: Tuple[int, int]

    @property
    def holds(self) -> bool:
        return self.minimum >= self.bound - 1e-9


def uniform_kgrid(n_k: int) -> np.ndarray:
    """The n_k x n_k grid -1/2 + j/n_k, j = 1..n_k, per axis (k_1 slow)."""
    if n_k < 2:
        raise SpectralToolkitError("k-grid needs at least two points per axis", {"n_k": n_k})
    axis = -0.5 + np.arange(1, n_k + 1) / n_k
    k1, k2 = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([k1.ravel(), k2.ravel()], axis=-1)


def eigensolve(
    H: Union[FiberMatrix, np.ndarray],
    spot_checks: int = 3,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix with residual spot checks."""
    entries = H.entries if isinstance(H, FiberMatrix) else np.asarray(H)
    context = {"dim": entries.shape[0]}
    if isinstance(H, FiberMatrix):
        context["k"] = tuple(float(x) for x in H.k)
    scale = float(np.max(np.abs(entries), initial=0.0))
    if np.max(np.abs(entries - entries.conj().T), initial=0.0) > 1e-12 * scale:
        raise SolverError("matrix is not Hermitian", context)
    try:
        if spot_checks <= 0:
            return la.eigh(entries, eigvals_only=True)
        values, vectors = la.eigh(entries)
    except (la.LinAlgError, ValueError) as e:
        raise SolverError(f"Hermitian eigensolver failed: {e}", context) from e

    rng = rng if rng is not None else np.random.default_rng(0)
    norm = float(np.max(np.abs(values), initial=0.0))
    picks = rng.choice(values.size, size=min(spot_checks, values.size), replace=False)
    for i in picks:
        residual = np.linalg.norm(entries @ vectors[:, i] - values[i] * vectors[:, i])
        if residual > 1e-10 * max(norm, 1e-300):
            raise SolverError("eigenpair residual above tolerance", {**context, "index": int(i), "residual": residual})
    return values


def center_window(values: np.ndarray, center: float, half: int = WINDOW_HALF, touch_tol: float = 1e-12) -> np.ndarray:
    """The `half` eigenvalues just below and just above center.

    Eigenvalues within touch_tol of the center are split evenly between the
    two sides.
    """
    values = np.sort(np.asarray(values, dtype=float))
    tol = touch_tol * max(1.0, float(np.max(np.abs(values))))
    below = int(np.count_nonzero(values < center - tol))
    at_center = int(np.count_nonzero(np.abs(values - center) <= tol))
    split = below + at_center // 2
    start = max(split - half, 0)
    stop = min(split + half, values.size)
    return values[start:stop]


class SpectrumService:
    def __init__(
        self,
        disp: Dispersion,
        pot: Potential,
        threads: int = 1,
        max_dim: int = DEFAULT_MAX_DIM,
        seed: int = 0,
        spot_checks: int = 3,
        touch_tol: float = 1e-12,
        seed_touching_point: bool = True,
        inf_resolution: Tuple[int, int] = (512, 256),
    ):
        self.disp = disp
        self.pot = pot
        self.threads = max(1, int(threads))
        self.max_dim = max_dim
        self.seed = seed
        self.spot_checks = spot_checks
        self.touch_tol = touch_tol
        self.seed_touching_point = seed_touching_point
        self.inf_resolution = inf_resolution
        self.flux: FluxDecomposition = project_flux(flux_moments(pot), disp.A)

    def params(self, alpha: float, beta: float) -> Params:
        return Params(alpha=alpha, beta=beta, d=self.disp.d)

    def fiber_eigenvalues(self, k, params: Params, N: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        H = assemble_fiber(k, basis_set(N), self.disp, self.pot, params, max_dim=self.max_dim)
        return eigensolve(H, spot_checks=self.spot_checks, rng=rng)

    def touching_momenta(self, params: Params) -> np.ndarray:
        """Bloch momentum where the P0-block symbol |F(-2 pi k) + lam Phi| is smallest."""
        n_radii, n_angles = self.inf_resolution
        _, p_star = inf_minimizer(self.disp, self.flux, params.lam, n_radii=n_radii, n_angles=n_angles)
        return fold_to_cell(-p_star / (2.0 * np.pi))[None, :]

    def band_structure(self, params: Params, N: int, n_k: int) -> BandStructure:
        grid = uniform_kgrid(n_k)
        n_seeded = 0
        if self.seed_touching_point:
            for k_star in self.touching_momenta(params):
                if np.min(np.max(np.abs(grid - k_star), axis=1)) > 1e-12:
                    grid = np.vstack([grid, k_star])
                    n_seeded += 1
        logger.info(
            f"Band structure: {len(grid)} k-points ({n_seeded} seeded), N={N}, "
            f"alpha={params.alpha}, beta={params.beta}, threads={self.threads}"
        )

        def solve(index: int) -> np.ndarray:
            rng = np.random.default_rng([self.seed, index])
            return self.fiber_eigenvalues(grid[index], params, N, rng=rng)

        bands = np.array(parallel_map(solve, range(len(grid)), self.threads))
        tags = {
            "dispersion": self.disp.label,
            "potential": type(self.pot.shape).__name__,
        }
        return BandStructure(
            kgrid=grid, bands=bands, cutoff=N, n_k=n_k, params=params, tags=tags, n_seeded=n_seeded
        )

    def detect_gap(self, bs: BandStructure, center: float = 0.0) -> GapReport:
        values = bs.bands
        if values.size == 0:
            raise SpectralToolkitError("band structure is empty")
        if center < values.min() or center > values.max():
            raise SpectralToolkitError(
                "center outside the computed spectral window",
                {"center": center, "window": (float(values.min()), float(values.max()))},
            )
        tol = self.touch_tol * max(1.0, float(np.max(np.abs(values))))
        touching = bool(np.any(np.abs(values - center) <= tol))
        if touching:
            lower = upper = center
        else:
            lower = float(values[values < center].max())
            upper = float(values[values >= center].min())
        width = max(upper - lower, 0.0)
        params = bs.params
        report = GapReport(
            lower_edge=lower,
            upper_edge=upper,
            center=center,
            width=width,
            predicted_halfwidth_leading=0.5 * params.lam * self.flux.norm_perp,
            alpha=params.alpha,
            beta=params.beta,
            d_prime=params.d_prime,
            norm_perp=self.flux.norm_perp,
            cutoff=bs.cutoff,
            n_k=bs.n_k,
            touching=touching,
        )
        logger.info(f"Detected gap [{lower:.6e}, {upper:.6e}] width {width:.6e} (ratio {report.ratio})")
        return report

    def gap(self, params: Params, N: int, n_k: int, center: float = 0.0) -> GapReport:
        return self.detect_gap(self.band_structure(params, N, n_k), center)

    def convergence_check(
        self,
        k,
        params: Params,
        N: int,
        tol: Optional[float] = None,
        center: float = 0.0,
    ) -> Tuple[bool, float]:
        """Compare the eigenvalues nearest center at cutoffs N and 2N."""
        if N < 2:
            raise SpectralToolkitError("convergence check needs N >= 2", {"N": N})
        if tol is None:
            tol = 1e-6 * max(1.0, params.lam)
        coarse = center_window(self.fiber_eigenvalues(k, params, N), center, touch_tol=self.touch_tol)
        fine = center_window(self.fiber_eigenvalues(k, params, 2 * N), center, touch_tol=self.touch_tol)
        delta = float(np.max(np.abs(coarse - fine)))
        converged = delta <= tol
        logger.info(f"Convergence N={N} vs {2 * N} at k={tuple(k)}: delta={delta:.3e}, converged={converged}")
        return converged, delta

    def sweep(self, alphas: Sequence[float], betas: Sequence[float], N: int, n_k: int) -> SweepResult:
        result = SweepResult()
        alphas = list(dict.fromkeys(float(a) for a in alphas))
        betas = list(dict.fromkeys(float(b) for b in betas))
        for beta in betas:
            for alpha in alphas:
                start = time.perf_counter()
                try:
                    report = self.gap(self.params(alpha, beta), N, n_k)
                    ratio = report.ratio if report.ratio is not None else float("nan")
                    row = SweepRow(alpha, beta, N, n_k, report.width, ratio, time.perf_counter() - start)
                    smallness = alpha ** min(self.disp.d, 2.0) * beta
                    certified = self.disp.hypothesis_iii_strict and smallness <= INCLUSION_SMALLNESS
                    if certified and report.width < report.lam * self.flux.norm_perp:
                        logger.warning(f"Gap below the certified interval at alpha={alpha}, beta={beta}")
                        result.inclusion_violations.append((alpha, beta))
                except SpectralToolkitError as e:
                    logger.error(f"Sweep cell alpha={alpha}, beta={beta} failed: {str(e)}")
                    row = SweepRow(alpha, beta, N, n_k, float("nan"), float("nan"),
                                   time.perf_counter() - start, error=str(e))
                result.rows.append(row)
                logger.info(f"Sweep cell alpha={alpha}, beta={beta}: width={row.width:.6e}")

        for beta in betas:
            cells = [r for r in result.rows if r.beta == beta and r.error is None]
            fit = loglog_fit([r.alpha for r in cells], [r.width for r in cells])
            result.alpha_slopes[beta] = fit.slope
        good = [r for r in result.rows if r.error is None]
        d_prime = min(self.disp.d, 2.0)
        result.C_fit = correction_constant(
            [r.width for r in good],
            [r.alpha ** 2 * r.beta for r in good],
            [r.alpha ** d_prime * r.beta for r in good],
            self.flux.norm_perp,
        ) if good and self.flux.norm_perp > 0.0 else float("nan")
        return result

    def kinetic_bound(self, n_k: int = 64, N: int = 2) -> KineticBoundReport:
        """Closed-form min over grid k and modes m != 0 of |F(2 pi (m - k))|."""
        grid = uniform_kgrid(n_k)
        modes = basis_set(N).indices
        modes = modes[np.any(modes != 0, axis=1)]
        magnitudes = np.linalg.norm(
            self.disp(2.0 * np.pi * (modes[None, :, :] - grid[:, None, :])), axis=-1
        )
        i, j = np.unravel_index(np.argmin(magnitudes), magnitudes.shape)
        report = KineticBoundReport(
            minimum=float(magnitudes[i, j]),
            bound=math.pi ** self.disp.d * self.disp.K0_lower,
            k_argmin=(float(grid[i, 0]), float(grid[i, 1])),
            m_argmin=(int(modes[j, 0]), int(modes[j, 1])),
        )
        logger.info(f"Kinetic bound: min {report.minimum:.12f} vs pi^d K0' = {report.bound:.12f}")
        return report

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
from scipy.optimize import brentq

from services.spectrum_service import eigensolve
from utilities.dispersion import Dispersion
from utilities.errors import FeshbachError, SpectralToolkitError
from utilities.fitting import loglog_fit
from utilities.model import Params, inf_lower_bound, project_flux
from utilities.parallel import parallel_map
from utilities.planewave import (
    DEFAULT_MAX_DIM,
    IDENTITY,
    PAULI,
    FiberMatrix,
    assemble_fiber,
    assemble_free,
    basis_set,
    fourier_table,
    operator_matrix,
    partition,
    pauli_components,
    split_blocks,
)
from utilities.potential import Potential, flux_moments

logger = logging.getLogger(__name__)

NEUMANN_LIMIT = 1.0 / 3.0
SCAN_POINTS = 41
TRUNCATION_CHANGE = 0.02
REMAINDER_KSET = ((0.0, 0.0), (0.25, 0.0), (0.5, 0.0), (0.25, 0.25), (0.5, 0.5))


@dataclass(frozen=True, eq=False)
class FeshbachEval:
    z: complex
    FP0: np.ndarray
    BP0_norm: float
    Q0_min_singular: float
    scale: float = 0.0

    @property
    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.FP0 - self.FP0.conj().T)))

    @property
    def singular_values(self) -> np.ndarray:
        return la.svdvals(self.FP0)

    @property
    def relative_singularity(self) -> float:
        """Smallest singular value of FP0 over the larger of ||FP0|| and the fiber matrix scale."""
        s = self.singular_values
        reference = max(float(s[0]), self.scale)
        return float(s[-1] / reference) if reference > 0.0 else 0.0

    def to_dict(self) -> Dict:
        return {
            "z_real": float(np.real(self.z)),
            "z_imag": float(np.imag(self.z)),
            "BP0_norm": self.BP0_norm,
            "Q0_min_singular": self.Q0_min_singular,
            "FP0_min_singular": float(self.singular_values[-1]),
            "hermitian_defect": self.hermitian_defect,
        }


@dataclass(frozen=True, eq=False)
class CouplingNorms:
    wru: np.ndarray
    sup_wru: float
    neumann_ok: bool
    alpha: float = float("nan")
    beta: float = float("nan")
    z: float = 0.0
    cutoff: int = 0
    sup_wru_doubled: Optional[float] = None
    truncation_change: Optional[float] = None

    @property
    def truncation_ok(self) -> Optional[bool]:
        if self.truncation_change is None:
            return None
        return self.truncation_change <= TRUNCATION_CHANGE


@dataclass
class RootCheckReport:
    window: Tuple[float, float]
    eigenvalues: List[float] = field(default_factory=list)
    relative_singularity: List[float] = field(default_factory=list)
    skipped: List[float] = field(default_factory=list)
    scan_z: List[float] = field(default_factory=list)
    scan_min_singular: List[float] = field(default_factory=list)
    scan_bound: List[float] = field(default_factory=list)
    missing_roots: List[float] = field(default_factory=list)
    spurious_roots: List[float] = field(default_factory=list)

    @property
    def max_relative_singularity(self) -> float:
        return max(self.relative_singularity, default=0.0)

    @property
    def roots_ok(self) -> bool:
        return self.max_relative_singularity <= 1e-8 and not self.missing_roots and not self.spurious_roots

    @property
    def scan_ok(self) -> bool:
        return all(s >= b - 1e-12 for s, b in zip(self.scan_min_singular, self.scan_bound))

    @property
    def center_min_singular(self) -> Optional[float]:
        if not self.scan_z:
            return None
        return self.scan_min_singular[int(np.argmin(np.abs(self.scan_z)))]


@dataclass(frozen=True)
class RemainderCell:
    alpha: float
    beta: float
    BP0_norm: float
    sup_wru: float
    normalised: float
    excluded: bool = False
    error: Optional[str] = None
    BP0_norm_doubled: Optional[float] = None
    truncation_change: Optional[float] = None

    @property
    def truncation_ok(self) -> Optional[bool]:
        if self.truncation_change is None:
            return None
        return self.truncation_change <= TRUNCATION_CHANGE


@dataclass
class RemainderScaling:
    cells: List[RemainderCell] = field(default_factory=list)
    alpha_slopes: Dict[float, float] = field(default_factory=dict)
    alpha_residuals: Dict[float, float] = field(default_factory=dict)
    beta_slopes: Dict[float, float] = field(default_factory=dict)
    beta_doubling_ratios: Dict[float, List[float]] = field(default_factory=dict)
    beta_limit_spread: Dict[float, float] = field(default_factory=dict)
    C_remainder: float = float("nan")

    @property
    def excluded(self) -> List[Tuple[float, float]]:
        return [(c.alpha, c.beta) for c in self.cells if c.excluded]

    @property
    def truncation_ok(self) -> Optional[bool]:
        """All certified cells changed by at most TRUNCATION_CHANGE from N to 2N; None if none were certified."""
        verdicts = [c.truncation_ok for c in self.cells if not c.excluded and c.truncation_ok is not None]
        return all(verdicts) if verdicts else None

    @property
    def max_truncation_change(self) -> Optional[float]:
        changes = [c.truncation_change for c in self.cells if not c.excluded and c.truncation_change is not None]
        return max(changes, default=None)


@dataclass(frozen=True)
class NeumannReport:
    sup_wru: float
    n_terms: int
    truncation_error: float
    distilled_bound: float
    rigorous_bound: float
    woodbury_error: float
    roundoff_floor: float = 0.0

    @property
    def within_bound(self) -> bool:
        return self.truncation_error <= self.rigorous_bound + self.roundoff_floor


@dataclass(frozen=True)
class ScalingFit:
    alphas: Tuple[float, ...]
    values: Tuple[float, ...]
    slope: float
    constant: float


def _operator_scale(entries: np.ndarray) -> float:
    # max row sum bounds the 2-norm from above
    return float(np.max(np.sum(np.abs(entries), axis=1), initial=0.0))


def _relative_change(coarse: float, fine: float) -> float:
    return abs(fine - coarse) / fine if fine > 0.0 else 0.0


def schur(H: FiberMatrix, z: complex) -> FeshbachEval:
    """Feshbach map FP0(z) = P0 (H - z) P0 - C (Q0 (H - z) Q0)^(-1) C^H."""
    p_block, coupling, q_block = split_blocks(H)
    if q_block.size == 0:
        raise FeshbachError("Q₀ empty", {"cutoff": H.basis.cutoff})
    shifted = q_block - z * np.eye(q_block.shape[0])
    hermitian = bool(np.isreal(z))
    if hermitian:
        q_min = float(np.min(np.abs(la.eigvalsh(shifted))))
    else:
        q_min = float(la.svdvals(shifted)[-1])
    if q_min <= 1e-12 * max(_operator_scale(H.entries), 1e-300):
        raise FeshbachError("Q₀ block of H - z is singular", {"z": complex(z), "Q0_min_singular": q_min})
    term = coupling @ la.solve(shifted, coupling.conj().T, assume_a="her" if hermitian else "gen")
    fp0 = p_block - z * IDENTITY - term
    return FeshbachEval(
        z=z, FP0=fp0, BP0_norm=float(la.norm(term, 2)), Q0_min_singular=q_min, scale=_operator_scale(H.entries)
    )


def validity_band(disp: Dispersion) -> float:
    """Half-width K0' pi^d / 2 of the window where the free Q0 block stays invertible."""
    return 0.5 * disp.K0_lower * math.pi ** disp.d


def q0_min_singular(H_free: FiberMatrix, z: float, disp: Dispersion) -> float:
    """Closed-form smallest singular value of Q0 (h0_k - z) Q0 from its 2x2 diagonal blocks."""
    if not H_free.free:
        raise FeshbachError("closed-form Q₀ bound needs the free fiber matrix")
    band = validity_band(disp)
    if abs(z) > band:
        raise FeshbachError("z outside the free Q₀ window", {"z": z, "window": band})
    basis = H_free.basis
    if basis.n_modes <= 1:
        raise FeshbachError("Q₀ empty", {"cutoff": basis.cutoff})
    n = basis.n_modes
    index = np.arange(n)
    blocks = H_free.entries.reshape(n, 2, n, 2)[index, :, index, :]
    blocks = np.delete(blocks, basis.zero_position, axis=0)
    components = pauli_components(blocks).real
    shift = components[:, 0] - z
    length = np.linalg.norm(components[:, 1:], axis=-1)
    return float(np.min(np.minimum(np.abs(shift - length), np.abs(shift + length))))


def free_q_resolvent(H_free: FiberMatrix, z: complex) -> np.ndarray:
    """Q0 (h0_k - z)^(-1) Q0 as a dense matrix on Ran Q0, inverted block by block."""
    basis = H_free.basis
    n = basis.n_modes
    index = np.arange(n)
    blocks = H_free.entries.reshape(n, 2, n, 2)[index, :, index, :]
    blocks = np.delete(blocks, basis.zero_position, axis=0)
    inverses = np.linalg.inv(blocks - z * IDENTITY)
    return la.block_diag(*inverses)


def schur_root_check(
    matrix: np.ndarray,
    p_index: Sequence[int],
    window: Tuple[float, float],
    grid: int = 200,
    tol: float = 1e-8,
) -> RootCheckReport:
    """Compare eigenvalues of a Hermitian matrix with the roots of det F_P(z) on a window."""
    matrix = np.asarray(matrix, dtype=complex)
    p_index = np.asarray(p_index, dtype=int)
    q_index = np.delete(np.arange(matrix.shape[0]), p_index)
    p_block = matrix[np.ix_(p_index, p_index)]
    coupling = matrix[np.ix_(p_index, q_index)]
    q_block = matrix[np.ix_(q_index, q_index)]
    lo, hi = window
    report = RootCheckReport(window=(float(lo), float(hi)))
    q_values = la.eigvalsh(q_block)

    def feshbach(z: float) -> np.ndarray:
        shifted = q_block - z * np.eye(q_index.size)
        return p_block - z * np.eye(p_index.size) - coupling @ la.solve(shifted, coupling.conj().T)

    def determinant(z: float) -> float:
        return float(np.real(np.linalg.det(feshbach(z))))

    values = la.eigvalsh(matrix)
    in_window = [float(v) for v in values if lo <= v <= hi]
    for value in in_window:
        if np.min(np.abs(q_values - value)) <= 1e-9:
            report.skipped.append(value)
            continue
        s = la.svdvals(feshbach(value))
        report.eigenvalues.append(value)
        report.relative_singularity.append(float(s[-1] / s[0]) if s[0] > 0.0 else 0.0)

    poles = sorted(float(q) for q in q_values if lo < q < hi)
    edges = [lo] + poles + [hi]
    roots = []
    for a, b in zip(edges[:-1], edges[1:]):
        a_in = a + 1e-9 if a in poles else a
        b_in = b - 1e-9 if b in poles else b
        if b_in <= a_in:
            continue
        z = np.linspace(a_in, b_in, grid)
        det = np.array([determinant(x) for x in z])
        for i in np.flatnonzero(np.sign(det[:-1]) * np.sign(det[1:]) < 0):
            roots.append(brentq(determinant, z[i], z[i + 1], xtol=1e-14, rtol=1e-15))
        roots.extend(float(x) for x, d in zip(z, det) if d == 0.0)

    roots = np.array(sorted(roots))
    for value in report.eigenvalues:
        if roots.size == 0 or np.min(np.abs(roots - value)) > tol * max(1.0, abs(value)):
            report.missing_roots.append(value)
    for root in roots:
        if not in_window or np.min(np.abs(np.array(in_window) - root)) > tol * max(1.0, abs(root)):
            report.spurious_roots.append(float(root))
    return report


class FeshbachService:
    def __init__(
        self,
        disp: Dispersion,
        pot: Potential,
        threads: int = 1,
        max_dim: int = DEFAULT_MAX_DIM,
        k_set: Sequence[Tuple[float, float]] = REMAINDER_KSET,
    ):
        self.disp = disp
        self.pot = pot
        self.threads = max(1, int(threads))
        self.max_dim = max_dim
        self.k_set = [np.asarray(k, dtype=float) for k in k_set]
        self.flux = project_flux(flux_moments(pot), disp.A)

    def params(self, alpha: float, beta: float) -> Params:
        return Params(alpha=alpha, beta=beta, d=self.disp.d)

    def fiber(self, k, params: Params, N: int) -> FiberMatrix:
        return assemble_fiber(k, basis_set(N), self.disp, self.pot, params, max_dim=self.max_dim)

    def free_fiber(self, k, N: int) -> FiberMatrix:
        return assemble_free(k, basis_set(N), self.disp, max_dim=self.max_dim)

    def _check_window(self, z: float) -> None:
        band = validity_band(self.disp)
        if abs(z) > band:
            raise FeshbachError("z outside the free Q₀ window", {"z": z, "window": band})

    def _indicator(self, alpha: float, N: int, spin: np.ndarray) -> np.ndarray:
        table = fourier_table(self.pot.shape.fourier, alpha, N)
        return operator_matrix(basis_set(N), table, spin[None])

    def _factors(self, alpha: float, N: int) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        """Truncated sqrt|chi_j| sigma_j (M_j) and sign(chi_l) sqrt|chi_l| (S_l)."""
        if not self.pot.is_indicator:
            raise FeshbachError("√χ Fourier data unavailable", {"shape": type(self.pot.shape).__name__})
        amplitudes = self.pot.amplitudes
        roots = np.sqrt(np.abs(amplitudes))
        plain = self._indicator(alpha, N, IDENTITY)
        M = [roots[j] * self._indicator(alpha, N, PAULI[j]) for j in range(3)]
        S = [np.sign(amplitudes[l]) * roots[l] * plain for l in range(3)]
        return M, S

    def _wru(self, k, params: Params, N: int, z: complex) -> np.ndarray:
        M, S = self._factors(params.alpha, N)
        _, q_index = partition(basis_set(N))
        R0 = free_q_resolvent(self.free_fiber(k, N), z)
        wru = np.zeros((3, 3))
        if params.beta == 0.0:
            return wru
        for j in range(3):
            left = M[j][:, q_index] @ R0
            for l in range(3):
                product = params.beta * (left @ S[l][q_index, :])
                wru[j, l] = la.svdvals(product)[0]
        return wru

    def coupling_norms(
        self, k, params: Params, N: int, z: float = 0.0, certify_truncation: bool = False
    ) -> CouplingNorms:
        """All nine ||W_j R0(z) U_l|| on the truncated basis."""
        self._check_window(z)
        wru = self._wru(k, params, N, z)
        sup = float(wru.max())
        change = fine = None
        if certify_truncation:
            fine = float(self._wru(k, params, 2 * N, z).max())
            change = _relative_change(sup, fine)
        norms = CouplingNorms(
            wru=wru,
            sup_wru=sup,
            neumann_ok=sup < NEUMANN_LIMIT,
            alpha=params.alpha,
            beta=params.beta,
            z=z,
            cutoff=N,
            sup_wru_doubled=fine,
            truncation_change=change,
        )
        logger.info(f"Coupling norms alpha={params.alpha}, beta={params.beta}, N={N}: sup={sup:.6e}")
        return norms

    def coupling_scaling(self, alphas: Sequence[float], beta: float, N: int, k=(0.0, 0.0)) -> ScalingFit:
        alphas = tuple(float(a) for a in alphas)
        values = tuple(
            parallel_map(lambda a: self.coupling_norms(k, self.params(a, beta), N).sup_wru, alphas, self.threads)
        )
        fit = loglog_fit(alphas, values)
        normalised = [v / (a ** self.disp.d_prime * beta) for a, v in zip(alphas, values) if beta > 0.0]
        return ScalingFit(alphas, values, fit.slope, max(normalised, default=float("nan")))

    def feshbach_root_check(
        self, H: FiberMatrix, window: Tuple[float, float], scan_points: int = SCAN_POINTS
    ) -> RootCheckReport:
        """Eigenvalues in the window are roots of det FP0; FP0 stays invertible across the gap scan."""
        band = validity_band(self.disp)
        lo, hi = max(window[0], -band), min(window[1], band)
        report = RootCheckReport(window=(lo, hi))
        values = eigensolve(H, spot_checks=0)
        for value in values[(values >= lo) & (values <= hi)]:
            try:
                evaluation = schur(H, float(value))
            except FeshbachError as e:
                logger.warning(f"Skipping eigenvalue {value:.6e}: {str(e)}")
                report.skipped.append(float(value))
                continue
            report.eigenvalues.append(float(value))
            report.relative_singularity.append(evaluation.relative_singularity)

        params = H.params
        if params is not None and params.lam > 0.0 and self.flux.norm_perp > 0.0:
            half = inf_lower_bound(self.flux, params.lam)
            for z in np.linspace(-half, half, scan_points):
                evaluation = schur(H, float(z))
                report.scan_z.append(float(z))
                report.scan_min_singular.append(float(evaluation.singular_values[-1]))
                report.scan_bound.append(half - abs(float(z)) - evaluation.BP0_norm)
        if not report.scan_ok:
            logger.warning("Feshbach map lost invertibility inside the certified interval")
        logger.info(
            f"Root check: {len(report.eigenvalues)} eigenvalues, "
            f"max relative singularity {report.max_relative_singularity:.3e}"
        )
        return report

    def bp0_norm(self, params: Params, N: int, z: float = 0.0) -> float:
        """max over the k-set of ||B_P0(z)|| at cutoff N."""
        return max(schur(self.fiber(k, params, N), z).BP0_norm for k in self.k_set)

    def remainder_norm(self, params: Params, N: int, z: float = 0.0) -> Tuple[float, float]:
        """(max over the k-set of ||B_P0(z)||, max over the k-set of sup_wru)."""
        bp0 = self.bp0_norm(params, N, z)
        sup = 0.0
        if self.pot.is_indicator:
            sup = max(self.coupling_norms(k, params, N, z).sup_wru for k in self.k_set)
        return bp0, sup

    def bp0_scaling(
        self,
        alphas: Sequence[float],
        betas: Sequence[float],
        N: int,
        z: float = 0.0,
        certify_truncation: bool = False,
    ) -> RemainderScaling:
        """||B_P0|| over an (alpha, beta) grid; with certify_truncation each cell is recomputed at 2N."""
        alphas = list(dict.fromkeys(float(a) for a in alphas))
        betas = sorted(dict.fromkeys(float(b) for b in betas))
        exponent = 2.0 + self.disp.d_prime

        def evaluate(cell: Tuple[float, float]) -> RemainderCell:
            alpha, beta = cell
            try:
                bp0, sup = self.remainder_norm(self.params(alpha, beta), N, z)
            except SpectralToolkitError as e:
                logger.error(f"Remainder cell alpha={alpha}, beta={beta} failed: {str(e)}")
                return RemainderCell(alpha, beta, float("nan"), float("nan"), float("nan"), True, str(e))
            normalised = bp0 / (beta ** 2 * alpha ** exponent) if beta > 0.0 else float("nan")
            excluded = self.pot.is_indicator and sup >= NEUMANN_LIMIT
            if excluded:
                logger.warning(f"Remainder cell alpha={alpha}, beta={beta} outside the Neumann regime (sup={sup:.3f})")
            doubled = change = None
            if certify_truncation and not excluded:
                try:
                    doubled = self.bp0_norm(self.params(alpha, beta), 2 * N, z)
                except SpectralToolkitError as e:
                    logger.error(f"Remainder cell alpha={alpha}, beta={beta} not certified at N={2 * N}: {str(e)}")
                    return RemainderCell(alpha, beta, bp0, sup, normalised, excluded, str(e), None, float("nan"))
                change = _relative_change(bp0, doubled)
                if change > TRUNCATION_CHANGE:
                    logger.warning(
                        f"Remainder cell alpha={alpha}, beta={beta}: ||B_P0|| moved {change:.2%} from N={N} to {2 * N}"
                    )
            return RemainderCell(alpha, beta, bp0, sup, normalised, excluded, None, doubled, change)

        cells = [(a, b) for b in betas for a in alphas]
        result = RemainderScaling(cells=parallel_map(evaluate, cells, self.threads))
        kept = [c for c in result.cells if not c.excluded]
        for beta in betas:
            row = [c for c in kept if c.beta == beta]
            fit = loglog_fit([c.alpha for c in row], [c.BP0_norm for c in row])
            result.alpha_slopes[beta] = fit.slope
            result.alpha_residuals[beta] = fit.residual
        for alpha in alphas:
            column = sorted((c for c in kept if c.alpha == alpha), key=lambda c: c.beta)
            result.beta_slopes[alpha] = loglog_fit([c.beta for c in column], [c.BP0_norm for c in column]).slope
            result.beta_doubling_ratios[alpha] = [
                b.BP0_norm / a.BP0_norm
                for a, b in zip(column[:-1], column[1:])
                if math.isclose(b.beta, 2.0 * a.beta) and a.BP0_norm > 0.0
            ]
            if len(column) >= 2 and column[0].beta > 0.0:
                first = column[0].BP0_norm / column[0].beta ** 2
                second = column[1].BP0_norm / column[1].beta ** 2
                result.beta_limit_spread[alpha] = abs(first / second - 1.0) if second > 0.0 else float("nan")
        finite = [c.normalised for c in kept if np.isfinite(c.normalised)]
        result.C_remainder = max(finite, default=float("nan"))
        logger.info(f"Remainder scaling: alpha slopes {result.alpha_slopes}, C={result.C_remainder:.4e}")
        return result

    def neumann_check(self, k, params: Params, N: int, z: float = 0.0, n_terms: int = 10) -> NeumannReport:
        """Partial Neumann sums and the Woodbury form against the directly inverted Q-block resolvent."""
        if n_terms < 1:
            raise FeshbachError("Neumann check needs at least one term", {"n_terms": n_terms})
        self._check_window(z)
        M, S = self._factors(params.alpha, N)
        _, q_index = partition(basis_set(N))
        root = math.sqrt(params.beta)
        W = [root * m[:, q_index] for m in M]
        U = [root * s[q_index, :] for s in S]
        H_free = self.free_fiber(k, N)
        R0 = free_q_resolvent(H_free, z)
        K = sum(u @ w for u, w in zip(U, W))
        sup = max(float(la.svdvals(w @ R0 @ u)[0]) for w in W for u in U)
        if sup >= NEUMANN_LIMIT:
            raise FeshbachError("Neumann series regime violated", {"sup_wru": sup})

        _, _, q_block = split_blocks(H_free)
        direct = la.inv(q_block - z * np.eye(q_block.shape[0]) + K)
        partial = np.zeros_like(R0)
        term = R0
        for _ in range(n_terms):
            partial = partial + term
            term = -term @ K @ R0
        error = float(la.norm(direct - partial, 2))

        U_all = np.hstack(U)
        W_all = np.vstack(W)
        inner = np.eye(W_all.shape[0]) + W_all @ R0 @ U_all
        woodbury = R0 - R0 @ U_all @ la.solve(inner, W_all @ R0)
        woodbury_error = float(la.norm(woodbury - direct, 2) / la.norm(direct, 2))

        max_u = max(float(la.svdvals(u)[0]) for u in U)
        max_wr = max(float(la.svdvals(w @ R0)[0]) for w in W)
        r0_norm = float(la.svdvals(R0)[0])
        ratio = 3.0 * sup
        rigorous = r0_norm * max_u * max_wr * 3.0 * ratio ** (n_terms - 1) / (1.0 - ratio)
        report = NeumannReport(
            sup_wru=sup,
            n_terms=n_terms,
            truncation_error=error,
            distilled_bound=sup ** n_terms / (1.0 - ratio),
            rigorous_bound=rigorous,
            woodbury_error=woodbury_error,
            roundoff_floor=1e-12 * r0_norm,
        )
        logger.info(
            f"Neumann check: {n_terms}-term error {error:.3e}, bound {rigorous:.3e}, Woodbury {woodbury_error:.3e}"
        )
        return report

    def resolvent_expansion_defect(self, k, params: Params, N: int, z: float = 0.0) -> float:
        """Relative defect of W R0(z) U = W R0(i) U + (z-i) W R0(i)^2 U + (z-i)^2 W R0(i) R0(z) R0(i) U."""
        M, S = self._factors(params.alpha, N)
        _, q_index = partition(basis_set(N))
        H_free = self.free_fiber(k, N)
        at_z = free_q_resolvent(H_free, z)
        at_i = free_q_resolvent(H_free, 1j)
        shift = z - 1j
        expansion = at_i + shift * at_i @ at_i + shift ** 2 * at_i @ at_z @ at_i
        defect = 0.0
        for m in M:
            for s in S:
                exact = m[:, q_index] @ at_z @ s[q_index, :]
                scale = la.norm(exact, 2)
                if scale == 0.0:
                    continue
                approx = m[:, q_index] @ expansion @ s[q_index, :]
                defect = max(defect, float(la.norm(exact - approx, 2) / scale))
        return defect

    def sqrt_projection_norm(self, alpha: float, N: int) -> float:
        """||1_{alpha shape} P0|| for the bare shape indicator on the truncated basis."""
        if not self.pot.is_indicator:
            raise FeshbachError("√χ Fourier data unavailable", {"shape": type(self.pot.shape).__name__})
        p_index, _ = partition(basis_set(N))
        plain = self._indicator(alpha, N, IDENTITY)
        return float(la.svdvals(plain[:, p_index])[0])

    def free_resolvent_smallness(self, alphas: Sequence[float], N: int, k=(0.0, 0.0)) -> ScalingFit:
        """||1_alpha (h0_k - i)^(-1) 1_alpha|| against alpha, with the fitted slope and max normalised value."""
        if not self.pot.is_indicator:
            raise FeshbachError("√χ Fourier data unavailable", {"shape": type(self.pot.shape).__name__})
        H_free = self.free_fiber(k, N)
        resolvent = la.inv(H_free.entries - 1j * np.eye(H_free.dim))
        values = []
        for alpha in alphas:
            plain = self._indicator(float(alpha), N, IDENTITY)
            values.append(float(la.svdvals(plain @ resolvent @ plain)[0]))
        alphas = tuple(float(a) for a in alphas)
        fit = loglog_fit(alphas, values)
        normalised = [v / a ** self.disp.d_prime for a, v in zip(alphas, values)]
        return ScalingFit(alphas, tuple(values), fit.slope, max(normalised, default=float("nan")))

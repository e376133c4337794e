import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from utilities.dispersion import Dispersion
from utilities.errors import AssemblyError
from utilities.model import Params
from utilities.potential import Potential

logger = logging.getLogger(__name__)

PAULI = np.array(
    [
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ],
    dtype=complex,
)
IDENTITY = np.eye(2, dtype=complex)
DEFAULT_MAX_DIM = 20_000


# Modes |m_1|, |m_2| <= N in row-major order from (-N, -N); mode i owns rows 2i, 2i + 1.
@dataclass(frozen=True, eq=False)
class BasisSet:
    cutoff: int
    indices: np.ndarray

    @property
    def n_modes(self) -> int:
        return int(self.indices.shape[0])

    @property
    def dim(self) -> int:
        return 2 * self.n_modes

    @property
    def zero_position(self) -> int:
        return self.position((0, 0))

    def position(self, m: Sequence[int]) -> int:
        m1, m2 = int(m[0]), int(m[1])
        N = self.cutoff
        if abs(m1) > N or abs(m2) > N:
            raise AssemblyError("mode outside the cutoff", {"m": (m1, m2), "cutoff": N})
        return (m1 + N) * (2 * N + 1) + (m2 + N)


@lru_cache(maxsize=16)
def basis_set(cutoff: int) -> BasisSet:
    if cutoff < 0:
        raise AssemblyError("cutoff must be non-negative", {"cutoff": cutoff})
    span = np.arange(-cutoff, cutoff + 1)
    m1, m2 = np.meshgrid(span, span, indexing="ij")
    indices = np.stack([m1.ravel(), m2.ravel()], axis=-1)
    indices.setflags(write=False)
    return BasisSet(cutoff=int(cutoff), indices=indices)


@dataclass(frozen=True, eq=False)
class FiberMatrix:
    k: np.ndarray
    params: Optional[Params]
    basis: BasisSet
    entries: np.ndarray
    free: bool = False

    @property
    def dim(self) -> int:
        return self.basis.dim

    def block(self, m: Sequence[int], m_prime: Sequence[int]) -> np.ndarray:
        i = 2 * self.basis.position(m)
        j = 2 * self.basis.position(m_prime)
        return self.entries[i:i + 2, j:j + 2]


def pauli_dot(v: np.ndarray) -> np.ndarray:
    """sigma . v for a trailing axis of length 3 (complex v allowed)."""
    return np.einsum("...l,lab->...ab", np.asarray(v), PAULI)


def pauli_components(block: np.ndarray) -> np.ndarray:
    """Coefficients (v_0, v_1, v_2, v_3) of block = v_0 I + sigma . v."""
    block = np.asarray(block)
    v0 = 0.5 * np.trace(block, axis1=-2, axis2=-1)
    rest = 0.5 * np.einsum("...ab,lba->...l", block, PAULI)
    return np.concatenate([v0[..., None], rest], axis=-1)


def in_cell(k: np.ndarray, slack: float = 1e-12) -> bool:
    k = np.asarray(k, dtype=float)
    return bool(np.all(k > -0.5 + slack) and np.all(k <= 0.5 + slack))


def fold_to_cell(k: np.ndarray) -> np.ndarray:
    """Representative of k modulo Z^2 inside (-1/2, 1/2]^2."""
    k = np.asarray(k, dtype=float)
    return k - np.ceil(k - 0.5)


def chi_alpha_fourier(pot: Potential, n, alpha: float) -> np.ndarray:
    """Fourier coefficient of chi(x / alpha) on the cell: alpha^2 chi_hat(alpha n)."""
    if not (0.0 < alpha <= 0.5):
        raise AssemblyError("alpha must lie in (0, 0.5]", {"alpha": alpha})
    n = np.asarray(n, dtype=float)
    return alpha ** 2 * pot.fourier(alpha * n)


def fourier_table(
    fourier: Callable[[np.ndarray], np.ndarray], alpha: float, cutoff: int
) -> np.ndarray:
    """alpha^2 f_hat(alpha n) for every difference n in [-2N, 2N]^2.

    The result has shape (4N+1, 4N+1, L) for an evaluator with L trailing
    components.
    """
    span = np.arange(-2 * cutoff, 2 * cutoff + 1, dtype=float)
    n1, n2 = np.meshgrid(span, span, indexing="ij")
    n = np.stack([n1, n2], axis=-1)
    values = alpha ** 2 * np.asarray(fourier(alpha * n))
    if values.ndim == 2:
        values = values[..., None]
    return values


def operator_matrix(basis: BasisSet, table: np.ndarray, spins: np.ndarray) -> np.ndarray:
    """Matrix of sum_l f_l(x) spins[l] in the plane-wave basis.

    Block (m, m') is sum_l table[m - m', l] spins[l].
    """
    N = basis.cutoff
    diff = basis.indices[:, None, :] - basis.indices[None, :, :] + 2 * N
    coefficients = table[diff[..., 0], diff[..., 1]]
    blocks = np.einsum("ijl,lab->iajb", coefficients, np.asarray(spins, dtype=complex))
    return blocks.reshape(basis.dim, basis.dim)


def _check_request(k: np.ndarray, basis: BasisSet, max_dim: int) -> None:
    if basis.dim > max_dim:
        raise AssemblyError("matrix dimension exceeds the configured guard", {"dim": basis.dim, "max_dim": max_dim})
    if not in_cell(k):
        raise AssemblyError("Bloch momentum outside the cell (-1/2, 1/2]^2", {"k": k.tolist()})


def _kinetic_blocks(k: np.ndarray, basis: BasisSet, disp: Dispersion) -> np.ndarray:
    return pauli_dot(disp(2.0 * np.pi * (basis.indices - k)))


def _mirror_upper(entries: np.ndarray) -> np.ndarray:
    upper = np.triu(entries, 1)
    mirrored = upper + upper.conj().T
    mirrored[np.diag_indices_from(mirrored)] = np.diag(entries).real
    return mirrored


def assemble_free(k, basis: BasisSet, disp: Dispersion, max_dim: int = DEFAULT_MAX_DIM) -> FiberMatrix:
    k = np.asarray(k, dtype=float).reshape(2)
    _check_request(k, basis, max_dim)
    n = basis.n_modes
    entries = np.zeros((n, 2, n, 2), dtype=complex)
    diagonal = np.arange(n)
    entries[diagonal, :, diagonal, :] = _kinetic_blocks(k, basis, disp)
    entries = _mirror_upper(entries.reshape(basis.dim, basis.dim))
    return FiberMatrix(k=k, params=None, basis=basis, entries=entries, free=True)


def assemble_fiber(
    k,
    basis: BasisSet,
    disp: Dispersion,
    pot: Potential,
    params: Params,
    max_dim: int = DEFAULT_MAX_DIM,
) -> FiberMatrix:
    """sigma . F(2 pi (m - k)) on the diagonal plus beta * c(m - m') . sigma."""
    k = np.asarray(k, dtype=float).reshape(2)
    _check_request(k, basis, max_dim)
    table = fourier_table(pot.fourier, params.alpha, basis.cutoff)
    potential = params.beta * operator_matrix(basis, table, PAULI)
    n = basis.n_modes
    entries = potential.reshape(n, 2, n, 2)
    diagonal = np.arange(n)
    entries[diagonal, :, diagonal, :] += _kinetic_blocks(k, basis, disp)
    entries = _mirror_upper(entries.reshape(basis.dim, basis.dim))
    return FiberMatrix(k=k, params=params, basis=basis, entries=entries, free=params.beta == 0.0)


def partition(basis: BasisSet) -> Tuple[np.ndarray, np.ndarray]:
    zero = basis.zero_position
    p_index = np.array([2 * zero, 2 * zero + 1])
    q_index = np.delete(np.arange(basis.dim), p_index)
    return p_index, q_index


def split_blocks(H: FiberMatrix) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(P0 block, P0-to-Q0 coupling, Q0 block) of a fiber matrix."""
    p_index, q_index = partition(H.basis)
    entries = H.entries
    return (
        entries[np.ix_(p_index, p_index)],
        entries[np.ix_(p_index, q_index)],
        entries[np.ix_(q_index, q_index)],
    )


def join_blocks(basis: BasisSet, p0_block: np.ndarray, coupling: np.ndarray, q0_block: np.ndarray) -> np.ndarray:
    p_index, q_index = partition(basis)
    entries = np.zeros((basis.dim, basis.dim), dtype=complex)
    entries[np.ix_(p_index, p_index)] = p0_block
    entries[np.ix_(p_index, q_index)] = coupling
    entries[np.ix_(q_index, p_index)] = coupling.conj().T
    entries[np.ix_(q_index, q_index)] = q0_block
    return entries

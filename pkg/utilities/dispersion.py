import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg as la

from utilities.errors import DispersionError

logger = logging.getLogger(__name__)

PLANE_EMBEDDING = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])


def _radial_power(p: np.ndarray, exponent: float) -> np.ndarray:
    """|p|**exponent with the convention 0**x = 0 at the origin."""
    norm = np.linalg.norm(p, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norm > 0.0, norm ** exponent, 0.0)
    if exponent == 0.0:
        scale = np.ones_like(norm)
    return scale


def _homogeneous_linear(A: np.ndarray, d: float) -> Callable[[np.ndarray], np.ndarray]:
    def evaluator(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return _radial_power(p, d - 1.0)[..., None] * (p @ A.T)

    return evaluator


def _multilayer_evaluator(layers: int) -> Callable[[np.ndarray], np.ndarray]:
    def evaluator(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        w = (p[..., 0] + 1j * p[..., 1]) ** layers
        return np.stack([w.real, w.imag, np.zeros_like(w.real)], axis=-1)

    return evaluator


@dataclass(frozen=True, eq=False)
class Dispersion:
    """Symbol F with exponent d, linearisation A (3x2) and sandwich constants."""

    kind: str
    d: float
    A: np.ndarray
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    K0_lower: float = 1.0
    K0_upper: float = 1.0
    hypothesis_iii_strict: bool = True
    label: str = ""

    def __post_init__(self):
        if not self.d > 0.0:
            raise DispersionError("dispersion exponent d must be positive", {"d": self.d})
        if not (0.0 < self.K0_lower <= self.K0_upper):
            raise DispersionError(
                "sandwich constants must satisfy 0 < K0_lower <= K0_upper",
                {"K0_lower": self.K0_lower, "K0_upper": self.K0_upper},
            )
        A = np.asarray(self.A, dtype=float)
        if A.shape != (3, 2):
            raise DispersionError("linearization must be a 3x2 matrix", {"shape": A.shape})
        check_rank(A)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        if not self.label:
            object.__setattr__(self, "label", self.kind)

    @property
    def d_prime(self) -> float:
        return min(self.d, 2.0)

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return self.evaluator(np.asarray(p, dtype=float))

    def is_odd(self, samples: int = 64, seed: int = 0) -> bool:
        """True when F(-p) = -F(p) on a random sample of momenta."""
        rng = np.random.default_rng(seed)
        p = rng.normal(size=(samples, 2)) * np.logspace(-2, 2, samples)[:, None]
        forward = self(p)
        scale = np.max(np.abs(forward)) + 1e-300
        return bool(np.max(np.abs(self(-p) + forward)) <= 1e-12 * scale)


def dirac() -> Dispersion:
    return Dispersion(
        kind="dirac", d=1.0, A=PLANE_EMBEDDING, evaluator=_homogeneous_linear(PLANE_EMBEDDING, 1.0)
    )


def power(d: float) -> Dispersion:
    return Dispersion(
        kind="power",
        d=float(d),
        A=PLANE_EMBEDDING,
        evaluator=_homogeneous_linear(PLANE_EMBEDDING, float(d)),
        label=f"power-{d:g}",
    )


def multilayer(layers: int) -> Dispersion:
    """Chiral N-layer symbol (Re (p1 + i p2)^N, Im (p1 + i p2)^N, 0).

    For N >= 2 the linearisation |p|^(d-1) A p only matches after an
    angle-dependent rotation, so the preset is flagged non-strict.
    """
    if int(layers) != layers or layers < 1:
        raise DispersionError("multilayer preset needs a positive integer layer count", {"layers": layers})
    layers = int(layers)
    return Dispersion(
        kind="multilayer",
        d=float(layers),
        A=PLANE_EMBEDDING,
        evaluator=_multilayer_evaluator(layers),
        hypothesis_iii_strict=layers == 1,
        label=f"multilayer-{layers}",
    )


def custom(
    evaluator: Callable[[np.ndarray], np.ndarray],
    d: float,
    A: np.ndarray,
    K0_lower: float,
    K0_upper: float,
    label: str = "custom",
) -> Dispersion:
    return Dispersion(
        kind="custom",
        d=float(d),
        A=np.asarray(A, dtype=float),
        evaluator=evaluator,
        K0_lower=float(K0_lower),
        K0_upper=float(K0_upper),
        label=label,
    )


def from_preset(kind: str, d: float = 1.0, layers: int = 2) -> Dispersion:
    if kind == "dirac":
        return dirac()
    if kind == "power":
        return power(d)
    if kind == "multilayer":
        return multilayer(layers)
    raise DispersionError(f"unknown dispersion preset '{kind}'", {"kind": kind})


def eval_dispersion(disp: Dispersion, p) -> np.ndarray:
    """F(p) for one momentum or an array of momenta."""
    return disp(np.asarray(p, dtype=float))


def linear_part(disp: Dispersion, p) -> np.ndarray:
    """The small-momentum model |p|^(d-1) A p."""
    return _homogeneous_linear(disp.A, disp.d)(np.asarray(p, dtype=float))


def check_rank(A: np.ndarray) -> None:
    singular_values = la.svdvals(np.asarray(A, dtype=float))
    if np.count_nonzero(singular_values > 1e-12) != 2:
        raise DispersionError("linearization not rank 2", {"singular_values": singular_values.tolist()})


def _polar_samples(radii: np.ndarray, n_angles: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(n_angles) / n_angles
    directions = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return radii[:, None, None] * directions[None, :, :]


def sandwich_ratios(
    disp: Dispersion, radii: Optional[np.ndarray] = None, n_angles: int = 64
) -> Tuple[float, float]:
    """Extreme values of |F(p)|/|p|^d over a polar sample."""
    if radii is None:
        radii = np.logspace(-3, 3, 100)
    radii = np.asarray(radii, dtype=float)
    p = _polar_samples(radii, n_angles)
    ratio = np.linalg.norm(disp(p), axis=-1) / radii[:, None] ** disp.d
    return float(ratio.min()), float(ratio.max())


def remainder_constant(
    disp: Dispersion, radii: Optional[np.ndarray] = None, n_angles: int = 64
) -> float:
    """Sampled max of |F(p) - |p|^(d-1) A p| / |p|^(d+1) for |p| in [1e-4, 1e-1]."""
    if radii is None:
        radii = np.logspace(-4, -1, 64)
    radii = np.asarray(radii, dtype=float)
    p = _polar_samples(radii, n_angles)
    residual = np.linalg.norm(disp(p) - linear_part(disp, p), axis=-1)
    k_rem = float(np.max(residual / radii[:, None] ** (disp.d + 1.0)))
    logger.debug(f"Fitted remainder constant {k_rem:.6e} for {disp.label}")
    return k_rem

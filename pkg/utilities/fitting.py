from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    residual: float
    points: int

    @property
    def prefactor(self) -> float:
        return float(np.exp(self.intercept))


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> LogLogFit:
    """Least-squares fit log y = intercept + slope * log x over positive samples."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0.0) & (y > 0.0) & np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    if x.size < 2 or np.ptp(np.log(x)) == 0.0:
        return LogLogFit(slope=float("nan"), intercept=float("nan"), residual=float("nan"), points=int(x.size))
    design = np.stack([np.ones_like(x), np.log(x)], axis=-1)
    log_y = np.log(y)
    theta, *_ = np.linalg.lstsq(design, log_y, rcond=None)
    residual = float(np.sqrt(np.mean((design @ theta - log_y) ** 2)))
    return LogLogFit(slope=float(theta[1]), intercept=float(theta[0]), residual=residual, points=int(x.size))


def correction_constant(
    widths: Sequence[float],
    lams: Sequence[float],
    smallness: Sequence[float],
    norm_perp: float,
) -> float:
    """C in width = 2 lam (|Phi_perp| - C * smallness) by least squares through the origin.

    The observed width is 2 lam |Phi_perp| at leading order, so the fit measures the
    sub-leading deficit. smallness is alpha^d' * beta per cell.
    """
    widths = np.asarray(widths, dtype=float)
    lams = np.asarray(lams, dtype=float)
    x = np.asarray(smallness, dtype=float)
    keep = (lams > 0.0) & (x > 0.0) & np.isfinite(widths)
    if not np.any(keep):
        return float("nan")
    deficit = norm_perp - widths[keep] / (2.0 * lams[keep])
    x = x[keep]
    return float(np.dot(x, deficit) / np.dot(x, x))

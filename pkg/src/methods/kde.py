"""Gaussian kernel density estimation over residual samples."""

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import logsumexp

from src.config.settings import ConfigConstants
from src.core.exceptions import MethodError

logger = logging.getLogger(__name__)

AUTO = 'auto'
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

Bandwidth = Union[float, str, Sequence[float]]


@dataclass(frozen=True)
class KdeModel:
    samples: np.ndarray
    bandwidth: float

    @property
    def m(self) -> int:
        return int(self.samples.size)

    def log_density(self, u) -> np.ndarray:
        """log p-hat(u), evaluated stably in log space."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        z = (u[:, None] - self.samples[None, :]) / self.bandwidth
        log_kernel = -0.5 * z ** 2 - _LOG_SQRT_2PI
        return logsumexp(log_kernel, axis=1) - math.log(self.m) - math.log(self.bandwidth)

    def density(self, u) -> np.ndarray:
        return np.exp(self.log_density(u))


def silverman_bandwidth(samples: np.ndarray) -> float:
    """1.06 * min(sd, IQR / 1.34) * m^(-1/5), with the zero-spread fallbacks."""
    sd = float(np.std(samples, ddof=1))
    q75, q25 = np.percentile(samples, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0.0:
        spread = sd
    if spread <= 0.0:
        fallback = ConfigConstants.KDE_ZERO_VARIANCE_SCALE * max(1.0, abs(float(np.mean(samples))))
        logger.warning(f"Zero sample variance in KDE samples; using bandwidth {fallback:g}")
        return fallback
    return ConfigConstants.SILVERMAN_FACTOR * spread * samples.size ** (-0.2)


def loo_log_likelihood(samples: np.ndarray, bandwidth: float) -> float:
    """Leave-one-out log-likelihood of `samples` under a KDE of the remaining points."""
    m = samples.size
    z = (samples[:, None] - samples[None, :]) / bandwidth
    log_kernel = -0.5 * z ** 2 - _LOG_SQRT_2PI
    np.fill_diagonal(log_kernel, -np.inf)
    per_point = logsumexp(log_kernel, axis=1) - math.log(m - 1) - math.log(bandwidth)
    return float(per_point.sum())


def select_bandwidth(samples: Sequence[float], grid: Sequence[float]) -> float:
    """Pick the bandwidth from `grid` maximizing leave-one-out log-likelihood."""
    samples = np.asarray(samples, dtype=float)
    grid = [float(h) for h in grid]
    if samples.size < 2:
        raise MethodError("bandwidth selection needs at least two samples")
    if not grid or min(grid) <= 0.0:
        raise MethodError(f"bandwidth grid must be non-empty and positive, got {grid}")
    scores = [loo_log_likelihood(samples, h) for h in grid]
    best = grid[int(np.argmax(scores))]
    logger.debug(f"Selected bandwidth {best:g} from {len(grid)} candidates")
    return best


def fit_kde(samples: Sequence[float], bandwidth: Bandwidth = AUTO) -> KdeModel:
    """
    Fit a Gaussian KDE.

    Args:
        samples (Sequence[float]): Observed values z, non-empty and finite.
        bandwidth (float | "auto" | Sequence[float]): Explicit h, Silverman's rule,
            or a grid H searched by leave-one-out likelihood.

    Returns:
        KdeModel: Stored samples and the resolved bandwidth.
    """
    samples = np.array(samples, dtype=float).reshape(-1)
    if samples.size == 0:
        raise MethodError("KDE needs at least one sample")
    if not np.all(np.isfinite(samples)):
        raise MethodError("KDE samples must be finite")
    if isinstance(bandwidth, str):
        if bandwidth.lower() != AUTO:
            raise MethodError(f"unknown bandwidth rule {bandwidth!r}")
        if samples.size < 2:
            raise MethodError("automatic bandwidth needs at least two samples")
        h = silverman_bandwidth(samples)
    elif isinstance(bandwidth, (int, float)):
        h = float(bandwidth)
    else:
        h = select_bandwidth(samples, bandwidth)
    if not h > 0.0 or not math.isfinite(h):
        raise MethodError(f"bandwidth must be positive, got {h}")
    samples.setflags(write=False)
    return KdeModel(samples, h)


def density(model: KdeModel, u: float) -> float:
    """p-hat(u) = (1/m) sum (1/h) phi((u - z_i) / h)."""
    return float(model.density(u)[0])

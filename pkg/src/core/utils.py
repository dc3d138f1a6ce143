import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np
from scipy.stats import norm

from src.config.settings import ConfigConstants, EnvSettings

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')

_SEED_MASK = (1 << 64) - 1


def make_rng(seed: int, *task: int) -> np.random.Generator:
    """
    Build a PCG64 generator for a (seed, task...) substream.

    Args:
        seed (int): Base 64-bit seed; negative values are wrapped.
        *task (int): Task indices (member, fold, replicate, ...) selecting a substream.

    Returns:
        np.random.Generator: Independent, reproducible generator.
    """
    entropy = [int(seed) & _SEED_MASK, *(int(t) & _SEED_MASK for t in task)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *task: int) -> int:
    """Draw a 63-bit child seed from the (seed, task...) substream."""
    return int(make_rng(seed, *task).integers(0, 2**63 - 1))


def z_critical(alpha: float) -> float:
    """Two-sided standard normal critical value z_{1-alpha/2}."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(norm.ppf(1.0 - alpha / 2.0))


def ecdf_quantile(values: Sequence[float], p: float) -> float:
    """
    Empirical inverse CDF: the ceil(p*B)-th order statistic, index clamped to [1, B].

    Args:
        values (Sequence[float]): Sample of size B.
        p (float): Probability level in [0, 1].

    Returns:
        float: An element of `values`.
    """
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        raise ValueError("ecdf_quantile needs at least one value")
    rank = math.ceil(p * ordered.size - ConfigConstants.QUANTILE_TOLERANCE)
    rank = min(max(rank, 1), ordered.size)
    return float(ordered[rank - 1])


def resolve_workers(workers: Optional[int]) -> int:
    return max(1, workers if workers is not None else EnvSettings.PIF_WORKERS)


def parallel_map(func: Callable[[T], R], items: Sequence[T], workers: Optional[int] = None) -> List[R]:
    """
    Apply `func` to every item, in a thread pool when more than one worker is configured.

    Results keep the order of `items`, so callers stay deterministic regardless of scheduling.
    """
    count = resolve_workers(workers)
    if count == 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=count) as pool:
        return list(pool.map(func, items))

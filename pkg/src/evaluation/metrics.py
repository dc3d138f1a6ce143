import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from src.config.settings import ConfigConstants
from src.core.models import PredictionInterval
from src.core.utils import z_critical


@dataclass(frozen=True)
class PiOutcome:
    """An interval scored against the target it was built for."""

    interval: PredictionInterval
    true_target: float
    hit: bool
    width: float

    @classmethod
    def score(cls, interval: PredictionInterval, true_target: float) -> 'PiOutcome':
        return cls(interval, float(true_target), interval.contains(true_target), interval.width)

    @property
    def empty(self) -> bool:
        return self.interval.empty


@dataclass(frozen=True)
class CoverageSummary:
    coverage: float
    mean_width: float
    se_coverage: float
    se_width: float
    count: int
    hits: int
    empty_count: int


def _standard_error(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


def coverage_and_width(outcomes: Sequence[PiOutcome]) -> CoverageSummary:
    """
    Hit fraction and mean width with their standard errors (sample sd / sqrt(count)).

    Empty intervals count as misses of width 0.
    """
    if not outcomes:
        raise ValueError("coverage needs at least one outcome")
    hits = np.array([o.hit for o in outcomes], dtype=float)
    widths = np.array([o.width for o in outcomes], dtype=float)
    return CoverageSummary(
        coverage=float(hits.mean()),
        mean_width=float(widths.mean()),
        se_coverage=_standard_error(hits),
        se_width=_standard_error(widths),
        count=len(outcomes),
        hits=int(hits.sum()),
        empty_count=sum(o.empty for o in outcomes),
    )


def replicate_summary(coverages: Sequence[float], widths: Sequence[float]) -> Tuple[float, float, float, float]:
    """(mean coverage, mean width, se coverage, se width) across replicate means."""
    coverages = np.asarray(coverages, dtype=float)
    widths = np.asarray(widths, dtype=float)
    return (float(coverages.mean()), float(widths.mean()),
            _standard_error(coverages), _standard_error(widths))


class ValidityResult(NamedTuple):
    valid: bool
    ci_low: float
    ci_high: float


def agresti_coull_valid(hits: int, n: int, nominal: float,
                        alpha_test: float = ConfigConstants.VALIDITY_ALPHA) -> ValidityResult:
    """
    Agresti-Coull test of whether observed coverage is consistent with `nominal`.

    n~ = n + z^2, p~ = (hits + z^2/2) / n~, half = z sqrt(p~(1 - p~) / n~); valid iff nominal
    lies in [p~ - half, p~ + half]. Bounds are kept strictly inside (0, 1).
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not 0 <= hits <= n:
        raise ValueError(f"hits must lie in [0, {n}], got {hits}")
    z = z_critical(alpha_test)
    n_adj = n + z ** 2
    p_adj = (hits + z ** 2 / 2.0) / n_adj
    half = z * math.sqrt(p_adj * (1.0 - p_adj) / n_adj)
    low = max(p_adj - half, np.nextafter(0.0, 1.0))
    high = min(p_adj + half, np.nextafter(1.0, 0.0))
    return ValidityResult(bool(low <= nominal <= high), float(low), float(high))


@dataclass(frozen=True)
class ConditionalBinReport:
    """Coverage and width per bin; `coverage`/`mean_width` are None for empty bins."""

    labels: Tuple[str, ...]
    counts: Tuple[int, ...]
    coverage: Tuple[Optional[float], ...]
    mean_width: Tuple[Optional[float], ...]

    def as_records(self) -> List[dict]:
        return [
            {'bin': label, 'count': count, 'coverage': cov, 'mean_width': width}
            for label, count, cov, width in zip(self.labels, self.counts, self.coverage, self.mean_width)
        ]


def _edge_labels(edges: Sequence[float]) -> List[str]:
    labels = [f"<{edges[0]:g}"]
    labels += [f"{lo:g}-{hi:g}" for lo, hi in zip(edges[:-1], edges[1:])]
    labels.append(f">{edges[-1]:g}")
    return labels


def conditional_coverage(outcomes: Sequence[PiOutcome], key: Sequence[Union[float, str]],
                         bins: Sequence[Union[float, str]]) -> ConditionalBinReport:
    """
    Coverage computed separately per subset of the outcomes.

    Args:
        outcomes (Sequence[PiOutcome]): Scored intervals.
        key (Sequence[float | str]): Per-outcome feature value, predicted target or category.
        bins (Sequence[float | str]): Increasing numeric edges (overflow bins are added on
            both ends, intervals closed on the left) or a list of category labels.

    Returns:
        ConditionalBinReport: One entry per bin, counts summing to len(outcomes).
    """
    if len(key) != len(outcomes):
        raise ValueError(f"{len(key)} keys for {len(outcomes)} outcomes")
    numeric = all(isinstance(b, (int, float, np.floating, np.integer)) for b in bins)
    if numeric:
        edges = np.asarray(bins, dtype=float)
        if edges.size == 0 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be non-empty and strictly increasing")
        index = np.searchsorted(edges, np.asarray(key, dtype=float), side='right')
        labels = _edge_labels(list(edges))
    else:
        labels = [str(b) for b in bins]
        lookup = {label: i for i, label in enumerate(labels)}
        missing = sorted({str(k) for k in key} - lookup.keys())
        labels += missing
        lookup.update({label: len(lookup) + i for i, label in enumerate(missing)})
        index = np.array([lookup[str(k)] for k in key], dtype=int)

    counts, coverage, widths = [], [], []
    for i in range(len(labels)):
        members = [o for o, b in zip(outcomes, index) if b == i]
        counts.append(len(members))
        if members:
            coverage.append(float(np.mean([o.hit for o in members])))
            widths.append(float(np.mean([o.width for o in members])))
        else:
            coverage.append(None)
            widths.append(None)
    return ConditionalBinReport(tuple(labels), tuple(counts), tuple(coverage), tuple(widths))

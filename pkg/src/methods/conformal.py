"""Conformity measures, conformal p-values and the full, split, cross and bootstrap conformal methods."""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.config.settings import ConfigConstants, ConformityKind
from src.core.data import bootstrap_resample, kfold_split
from src.core.exceptions import FitError, MethodError
from src.core.models import (
    BootstrapResample,
    CandidateGrid,
    Dataset,
    GridPlan,
    PredictionInterval,
    PValueTable,
)
from src.core.utils import derive_seed, make_rng, parallel_map
from src.evaluation.ledger import BurdenLedger, charged_fit
from src.learners import LearnerSpec, Regressor
from src.methods.kde import AUTO, Bandwidth, KdeModel, fit_kde

logger = logging.getLogger(__name__)

P_VALUE_TOLERANCE = 1e-12

GridLike = Union[CandidateGrid, GridPlan]


@dataclass(frozen=True)
class ConformityMeasure:
    """
    Strangeness of a (prediction, target) pair; larger is stranger for both kinds.

    The KDE kind scores -ln p(target - prediction) where p is fit to signed calibration
    residuals y - f(x).
    """

    kind: ConformityKind
    kde: Optional[KdeModel] = None

    def __post_init__(self):
        if (self.kind is ConformityKind.KDE_NEG_LOG_DENSITY) != (self.kde is not None):
            raise MethodError(f"conformity kind {self.kind.value} requires kde iff it is density based")

    @classmethod
    def fit(cls, kind: ConformityKind, residuals: Sequence[float],
            bandwidth: Bandwidth = AUTO) -> 'ConformityMeasure':
        kind = ConformityKind(kind)
        if kind is ConformityKind.ABSOLUTE_RESIDUAL:
            return cls(kind)
        return cls(kind, fit_kde(residuals, bandwidth))

    def scores(self, predictions, targets) -> np.ndarray:
        residuals = np.asarray(targets, dtype=float) - np.asarray(predictions, dtype=float)
        if self.kind is ConformityKind.ABSOLUTE_RESIDUAL:
            return np.abs(residuals)
        return -self.kde.log_density(residuals)


def conformity_score(measure: ConformityMeasure, prediction: float, target: float) -> float:
    return float(np.atleast_1d(measure.scores(prediction, target))[0])


def p_values(reference_scores: np.ndarray, test_scores, inclusive: bool = False) -> np.ndarray:
    """
    Conformal p-values of `test_scores` against sorted `reference_scores`.

    Default form: #{ref > test} / (l + 1). Inclusive form: (#{ref >= test} + 1) / (l + 1).
    """
    ordered = np.asarray(reference_scores, dtype=float)
    size = ordered.size
    if size == 0:
        raise MethodError("p-values need a non-empty reference score set")
    test_scores = np.atleast_1d(np.asarray(test_scores, dtype=float))
    if inclusive:
        counts = size - np.searchsorted(ordered, test_scores, side='left') + 1
    else:
        counts = size - np.searchsorted(ordered, test_scores, side='right')
    return counts / (size + 1.0)


def p_value(reference_scores: Sequence[float], test_score: float, inclusive: bool = False) -> float:
    return float(p_values(np.sort(np.asarray(reference_scores, dtype=float)), test_score, inclusive)[0])


def split_quantile(scores: Sequence[float], alpha: float, inclusive: bool = False) -> float:
    """
    Order-statistic threshold s* of the split method with absolute-residual conformity.

    Strict form: candidate q is accepted iff |f(x) - q| < s*, s* the floor((1-alpha)(l+1))-th
    smallest score (-inf when that index is 0). Inclusive form: accepted iff |f(x) - q| <= s*,
    s* the (floor((1-alpha)(l+1)) + 1)-th smallest (+inf past the largest score).
    """
    ordered = np.sort(np.asarray(scores, dtype=float))
    size = ordered.size
    j = math.floor((1.0 - alpha) * (size + 1) + ConfigConstants.QUANTILE_TOLERANCE)
    if inclusive:
        return math.inf if j + 1 > size else float(ordered[j])
    return -math.inf if j < 1 else float(ordered[j - 1])


def build_grid(center: float, half_width: float, M: int) -> CandidateGrid:
    """M evenly spaced candidates on [center - half_width, center + half_width]."""
    if not half_width > 0.0:
        raise MethodError(f"grid half-width must be positive, got {half_width}")
    if M < 2:
        raise MethodError(f"grid needs M >= 2 candidates, got {M}")
    return CandidateGrid(np.linspace(center - half_width, center + half_width, M), center, half_width)


def resolve_grid(grid: GridLike, center: float) -> CandidateGrid:
    if isinstance(grid, CandidateGrid):
        return grid
    return build_grid(center, grid.half_width, grid.size)


def interval_from_p_values(grid: CandidateGrid, pvals: np.ndarray, alpha: float,
                           center: float) -> PredictionInterval:
    """Candidates with p >= alpha; the interval is their hull, flagged empty when none survive."""
    accepted = grid.values[pvals >= alpha - P_VALUE_TOLERANCE]
    if accepted.size == 0:
        return PredictionInterval(math.nan, math.nan, 1.0 - alpha, center=center,
                                  accepted_candidates=accepted, empty=True)
    return PredictionInterval(float(accepted.min()), float(accepted.max()), 1.0 - alpha,
                              center=center, accepted_candidates=accepted)


@dataclass(frozen=True)
class CalibrationSource:
    """A fitted model with the conformity measure and sorted reference scores of its calibration rows."""

    regressor: Regressor
    measure: ConformityMeasure
    scores: np.ndarray

    @classmethod
    def calibrate(cls, regressor: Regressor, calibration: Dataset, kind: ConformityKind,
                  bandwidth: Bandwidth = AUTO) -> 'CalibrationSource':
        predictions = regressor.predict_many(calibration.features)
        measure = ConformityMeasure.fit(kind, calibration.targets - predictions, bandwidth)
        return cls(regressor, measure, np.sort(measure.scores(predictions, calibration.targets)))

    def p_values(self, x: np.ndarray, candidates: np.ndarray, inclusive: bool = False) -> np.ndarray:
        test_scores = self.measure.scores(self.regressor.predict(x), candidates)
        return p_values(self.scores, test_scores, inclusive)


@dataclass(frozen=True)
class ConformalPredictor:
    """
    Calibrated split, cross or bootstrap conformal method.

    All model fits happen during calibration; intervals for any number of test points
    cost no further trainings.
    """

    sources: Tuple[CalibrationSource, ...]
    aggregated: bool
    inclusive: bool = False

    def center(self, x: np.ndarray) -> float:
        return float(np.mean([s.regressor.predict(x) for s in self.sources]))

    def p_value_table(self, x: np.ndarray, grid: CandidateGrid) -> PValueTable:
        matrix = np.vstack([s.p_values(x, grid.values, self.inclusive) for s in self.sources])
        if not self.aggregated:
            return PValueTable(grid.values, matrix[0])
        return PValueTable(grid.values, matrix.mean(axis=0), matrix)

    def interval(self, x: np.ndarray, grid: GridLike, alpha: float) -> Tuple[PredictionInterval, PValueTable]:
        center = self.center(x)
        grid = resolve_grid(grid, center)
        table = self.p_value_table(x, grid)
        return interval_from_p_values(grid, table.per_candidate, alpha, center), table


def split_halves(n: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Even random split into (proper training rows, calibration rows)."""
    order = make_rng(seed).permutation(n)
    return np.sort(order[:n // 2]), np.sort(order[n // 2:])


def calibrate_split(spec: LearnerSpec, train: Dataset, measure_kind: ConformityKind, seed: int,
                    ledger: Optional[BurdenLedger] = None, label: str = 'split-conformal',
                    bandwidth: Bandwidth = AUTO, inclusive: bool = False) -> ConformalPredictor:
    """One fit on the proper half; reference scores from the calibration half."""
    if train.n < 4:
        raise MethodError(f"split conformal needs at least 4 training rows, got {train.n}")
    proper, calibration = split_halves(train.n, seed)
    model = charged_fit(spec.reseeded(derive_seed(seed, 1)), train.subset(proper), ledger, label)
    source = CalibrationSource.calibrate(model, train.subset(calibration), measure_kind, bandwidth)
    logger.debug(f"Split conformal calibrated on {calibration.size} rows")
    return ConformalPredictor((source,), aggregated=False, inclusive=inclusive)


def calibrate_cross(spec: LearnerSpec, train: Dataset, K: int, measure_kind: ConformityKind, seed: int,
                    ledger: Optional[BurdenLedger] = None, label: str = 'cross-conformal',
                    bandwidth: Bandwidth = AUTO, inclusive: bool = False,
                    workers: Optional[int] = None) -> ConformalPredictor:
    """
    K fits, each leaving one fold out; the held-out fold is that source's calibration set.

    The pseudocode scoring every training row against each fold model is not followed:
    rows a model was trained on would enter its reference scores.
    """
    if not 2 <= K <= train.n // 2:
        raise MethodError(f"cross conformal needs 2 <= K <= n/2, got K={K} with n={train.n}")
    folds = kfold_split(train.n, K, seed)

    def calibrate_fold(k: int) -> CalibrationSource:
        try:
            model = charged_fit(spec.reseeded(derive_seed(seed, k + 1)),
                                train.subset(folds.retained(k)), ledger, label)
            return CalibrationSource.calibrate(model, train.subset(folds.held_out(k)), measure_kind, bandwidth)
        except Exception as e:
            raise FitError(f"cross-conformal fold {k}: {e}", index=k) from e

    sources = parallel_map(calibrate_fold, list(range(K)), workers)
    logger.debug(f"Cross conformal calibrated {K} folds on {train.n} rows")
    return ConformalPredictor(tuple(sources), aggregated=True, inclusive=inclusive)


def calibrate_bootstrap(spec: LearnerSpec, train: Dataset, B: int, measure_kind: ConformityKind, seed: int,
                        ledger: Optional[BurdenLedger] = None, label: str = 'bootstrap-conformal',
                        bandwidth: Bandwidth = AUTO, inclusive: bool = False,
                        workers: Optional[int] = None,
                        resamples: Optional[Sequence[BootstrapResample]] = None) -> ConformalPredictor:
    """
    B fits on in-bag rows; each out-of-bag set is that source's calibration set.

    Args:
        resamples (Sequence[BootstrapResample], optional): Explicit resamples; drawn from
            the (seed, b) substreams when omitted.
    """
    if B < 2:
        raise MethodError(f"bootstrap conformal needs B >= 2, got {B}")
    if resamples is None:
        resamples = [bootstrap_resample(train.n, derive_seed(seed, b)) for b in range(B)]
    elif len(resamples) != B:
        raise MethodError(f"expected {B} resamples, got {len(resamples)}")

    def calibrate_resample(b: int) -> CalibrationSource:
        resample = resamples[b]
        if resample.out_of_bag_indices.size == 0:
            raise MethodError(f"resample {b} has an empty out-of-bag set")
        try:
            model = charged_fit(spec.reseeded(derive_seed(seed, b, 1)),
                                train.subset(resample.in_bag_indices), ledger, label)
            return CalibrationSource.calibrate(model, train.subset(resample.out_of_bag_indices),
                                               measure_kind, bandwidth)
        except Exception as e:
            raise FitError(f"bootstrap-conformal resample {b}: {e}", index=b) from e

    sources = parallel_map(calibrate_resample, list(range(B)), workers)
    logger.debug(f"Bootstrap conformal calibrated {B} resamples on {train.n} rows")
    return ConformalPredictor(tuple(sources), aggregated=True, inclusive=inclusive)


class FullConformal:
    """
    Transductive conformal method: one refit on train + (x, q) per candidate q.
    Reference scores cover every row of the augmented set, the candidate pair included.

    With a GridPlan the grid is centred on a model fit once on the original training set;
    that centering fit is charged the first time it is needed.
    """

    def __init__(self, spec: LearnerSpec, train: Dataset, measure_kind: ConformityKind, seed: int,
                 ledger: Optional[BurdenLedger] = None, label: str = 'full-conformal',
                 bandwidth: Bandwidth = AUTO, inclusive: bool = False, workers: Optional[int] = None):
        if train.n < 1:
            raise MethodError("full conformal needs a non-empty training set")
        self.spec = spec.reseeded(derive_seed(seed, 1))
        self.train = train
        self.measure_kind = ConformityKind(measure_kind)
        self.ledger = ledger
        self.label = label
        self.bandwidth = bandwidth
        self.inclusive = inclusive
        self.workers = workers
        self._center_model: Optional[Regressor] = None

    @property
    def center_model(self) -> Regressor:
        if self._center_model is None:
            self._center_model = charged_fit(self.spec, self.train, self.ledger, self.label)
        return self._center_model

    def candidate_p_value(self, x: np.ndarray, q: float) -> float:
        augmented = self.train.with_row(x, q)
        model = charged_fit(self.spec, augmented, self.ledger, self.label)
        predictions = model.predict_many(augmented.features)
        measure = ConformityMeasure.fit(self.measure_kind, augmented.targets - predictions, self.bandwidth)
        reference = np.sort(measure.scores(predictions, augmented.targets))
        test_score = measure.scores(predictions[-1], q)
        return float(p_values(reference, test_score, self.inclusive)[0])

    def interval(self, x: np.ndarray, grid: GridLike, alpha: float) -> Tuple[PredictionInterval, PValueTable]:
        if isinstance(grid, CandidateGrid):
            center = grid.center
        else:
            center = self.center_model.predict(x)
        grid = resolve_grid(grid, center)
        if grid.M * self.train.n > ConfigConstants.FULL_CONFORMAL_WARN_FITS:
            logger.warning(f"Full conformal will refit {grid.M} times on {self.train.n + 1} rows")

        def evaluate(j: int) -> float:
            try:
                return self.candidate_p_value(x, float(grid.values[j]))
            except Exception as e:
                raise FitError(f"full-conformal candidate {j}: {e}", index=j) from e

        pvals = np.array(parallel_map(evaluate, list(range(grid.M)), self.workers))
        table = PValueTable(grid.values, pvals)
        return interval_from_p_values(grid, pvals, alpha, center), table


def split_conformal_pi(spec: LearnerSpec, train: Dataset, x: np.ndarray, grid: GridLike, alpha: float,
                       measure_kind: ConformityKind, seed: int,
                       ledger: Optional[BurdenLedger] = None) -> Tuple[PredictionInterval, PValueTable]:
    """Split conformal interval for one test point; charges exactly one training."""
    return calibrate_split(spec, train, measure_kind, seed, ledger).interval(x, grid, alpha)


def full_conformal_pi(spec: LearnerSpec, train: Dataset, x: np.ndarray, grid: GridLike, alpha: float,
                      measure_kind: ConformityKind, seed: int,
                      ledger: Optional[BurdenLedger] = None) -> Tuple[PredictionInterval, PValueTable]:
    """Full conformal interval; charges |grid| trainings, plus one centering fit for a GridPlan."""
    return FullConformal(spec, train, measure_kind, seed, ledger).interval(x, grid, alpha)


def cross_conformal_pi(spec: LearnerSpec, train: Dataset, x: np.ndarray, grid: GridLike, alpha: float,
                       K: int, measure_kind: ConformityKind, seed: int,
                       ledger: Optional[BurdenLedger] = None) -> Tuple[PredictionInterval, PValueTable]:
    """Cross-conformal interval from fold-averaged p-values; charges K trainings."""
    return calibrate_cross(spec, train, K, measure_kind, seed, ledger).interval(x, grid, alpha)


def bootstrap_conformal_pi(spec: LearnerSpec, train: Dataset, x: np.ndarray, grid: GridLike, alpha: float,
                           B: int, measure_kind: ConformityKind, seed: int,
                           ledger: Optional[BurdenLedger] = None) -> Tuple[PredictionInterval, PValueTable]:
    """Bootstrap conformal interval from resample-averaged p-values; charges B trainings."""
    return calibrate_bootstrap(spec, train, B, measure_kind, seed, ledger).interval(x, grid, alpha)


def p_value_rows(table: PValueTable) -> List[Tuple[float, str, float]]:
    """(candidate, source, p-value) rows for audit export; aggregated rows use source 'agg'."""
    rows = []
    if table.per_source is not None:
        for k, row in enumerate(table.per_source):
            rows.extend((float(q), str(k), float(p)) for q, p in zip(table.candidates, row))
        source = 'agg'
    else:
        source = '0'
    rows.extend((float(q), source, float(p)) for q, p in zip(table.candidates, table.per_candidate))
    return rows

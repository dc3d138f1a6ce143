"""Pivot and percentile bootstrap prediction intervals over an ensemble of B regressors."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.config.settings import ConfigConstants
from src.core.data import bootstrap_resample
from src.core.exceptions import FitError, MethodError
from src.core.models import (
    AdjustedPredictionSample,
    BootstrapResample,
    Dataset,
    PivotComponents,
    PredictionInterval,
)
from src.core.utils import derive_seed, ecdf_quantile, make_rng, parallel_map, z_critical
from src.evaluation.ledger import BurdenLedger, charged_fit
from src.learners import LearnerSpec, Regressor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnsembleMember:
    regressor: Regressor
    resample: BootstrapResample


@dataclass(frozen=True)
class BootstrapEnsemble:
    members: Tuple[EnsembleMember, ...]

    def __post_init__(self):
        if len(self.members) < 2:
            raise MethodError(f"a bootstrap ensemble needs B >= 2 members, got {len(self.members)}")
        if any(m.resample.out_of_bag_indices.size == 0 for m in self.members):
            raise MethodError("every ensemble member needs a non-empty out-of-bag set")

    @property
    def B(self) -> int:
        return len(self.members)


def train_ensemble(spec: LearnerSpec, train: Dataset, B: int, seed: int,
                   ledger: Optional[BurdenLedger] = None, label: str = 'bootstrap',
                   workers: Optional[int] = None) -> BootstrapEnsemble:
    """
    Fit B learners, each on its own bootstrap resample of `train`.

    Member b draws its resample and its learner seed from the (seed, b) substream,
    so the ensemble does not depend on the worker count.
    """
    if train.n < 2:
        raise MethodError(f"bootstrap ensembles need at least 2 training rows, got {train.n}")
    if B < 2:
        raise MethodError(f"B must be >= 2, got {B}")

    def train_member(b: int) -> EnsembleMember:
        resample = bootstrap_resample(train.n, derive_seed(seed, b))
        member_spec = spec.reseeded(derive_seed(seed, b, 1))
        try:
            model = charged_fit(member_spec, train.subset(resample.in_bag_indices), ledger, label)
        except Exception as e:
            raise FitError(f"ensemble member {b}: {e}", index=b) from e
        return EnsembleMember(model, resample)

    members = parallel_map(train_member, list(range(B)), workers)
    logger.info(f"Trained bootstrap ensemble of {B} {spec.label()} members on {train.n} rows")
    return BootstrapEnsemble(tuple(members))


def member_predictions(ens: BootstrapEnsemble, x: np.ndarray) -> np.ndarray:
    return np.array([m.regressor.predict(x) for m in ens.members])


def bagged_prediction(ens: BootstrapEnsemble, x: np.ndarray) -> float:
    """Simple average of the member predictions."""
    return float(np.mean(member_predictions(ens, x)))


def prediction_variance(ens: BootstrapEnsemble, x: np.ndarray) -> float:
    """Sample variance of member predictions about the bagged prediction (divisor B - 1)."""
    if ens.B < 2:
        raise MethodError("prediction variance needs B >= 2")
    return float(np.var(member_predictions(ens, x), ddof=1))


def oob_residuals(ens: BootstrapEnsemble, train: Dataset) -> List[np.ndarray]:
    """Residuals y - f_b(x) of every member over its own out-of-bag rows."""
    residuals = []
    for member in ens.members:
        oob = member.resample.out_of_bag_indices
        predicted = member.regressor.predict_many(train.features[oob])
        residuals.append(train.targets[oob] - predicted)
    return residuals


def member_error_estimate(residuals: Sequence[float]) -> float:
    """Mean squared out-of-bag residual with divisor (n_oob - 1)."""
    residuals = np.asarray(residuals, dtype=float)
    if residuals.size < 2:
        raise MethodError(f"irreducible error needs >= 2 out-of-bag rows per member, got {residuals.size}")
    return float(np.sum(residuals ** 2) / (residuals.size - 1))


def irreducible_error(ens: BootstrapEnsemble, train: Dataset) -> float:
    """
    Average over members of the out-of-bag error estimate.

    The residuals are taken on each member's out-of-bag rows; in-bag residuals would shrink
    the estimate toward the training error.
    """
    return float(np.mean([member_error_estimate(r) for r in oob_residuals(ens, train)]))


def pivot_interval(components: PivotComponents, alpha: float) -> PredictionInterval:
    center = components.bagged_prediction
    half = components.half_width
    return PredictionInterval(center - half, center + half, 1.0 - alpha, center=center, pivot=components)


def pivot_pi(ens: BootstrapEnsemble, train: Dataset, x: np.ndarray, alpha: float,
             noise_variance: Optional[float] = None) -> PredictionInterval:
    """
    Normal-theory interval f(x) +/- z_{1-alpha/2} sqrt(var(x) + var_eps).

    Args:
        ens (BootstrapEnsemble): Trained ensemble.
        train (Dataset): Rows the ensemble was trained on (for out-of-bag residuals).
        x (np.ndarray): Test feature vector.
        alpha (float): Miscoverage level in (0, 1).
        noise_variance (float, optional): Precomputed irreducible error, reused across test points.

    Returns:
        PredictionInterval: Symmetric interval with its PivotComponents attached.
    """
    predictions = member_predictions(ens, x)
    components = PivotComponents(
        bagged_prediction=float(np.mean(predictions)),
        prediction_variance=float(np.var(predictions, ddof=1)),
        irreducible_error=irreducible_error(ens, train) if noise_variance is None else noise_variance,
        z_critical=z_critical(alpha),
    )
    return pivot_interval(components, alpha)


def adjusted_predictions(ens: BootstrapEnsemble, x: np.ndarray, residuals: Sequence[np.ndarray],
                         rng: np.random.Generator) -> AdjustedPredictionSample:
    """g_b(x) = f_b(x) + e_b with e_b drawn uniformly from member b's out-of-bag residuals."""
    predictions = member_predictions(ens, x)
    errors = np.empty(ens.B)
    for b, r in enumerate(residuals):
        if len(r) == 0:
            raise MethodError(f"member {b} has no out-of-bag residuals")
        errors[b] = r[rng.integers(len(r))]
    return AdjustedPredictionSample(predictions, errors, predictions + errors)


def check_percentile_resamples(B: int) -> None:
    if B < ConfigConstants.PERCENTILE_MIN_RESAMPLES:
        raise MethodError(
            f"percentile bootstrap needs B >= {ConfigConstants.PERCENTILE_MIN_RESAMPLES}, got {B}"
        )
    if B < ConfigConstants.PERCENTILE_RECOMMENDED_RESAMPLES:
        logger.warning(f"Percentile bootstrap with B={B}; tail quantiles want B >= 1000")


def percentile_interval(sample: AdjustedPredictionSample, alpha: float) -> PredictionInterval:
    lower = ecdf_quantile(sample.values, alpha / 2.0)
    upper = ecdf_quantile(sample.values, 1.0 - alpha / 2.0)
    center = float(np.mean(sample.predictions))
    return PredictionInterval(lower, upper, 1.0 - alpha, center=center, adjusted=sample)


def percentile_pi(ens: BootstrapEnsemble, train: Dataset, x: np.ndarray, alpha: float, seed: int,
                  residuals: Optional[Sequence[np.ndarray]] = None) -> PredictionInterval:
    """
    Interval [G_(alpha/2), G_(1-alpha/2)] from the empirical distribution of adjusted predictions.

    Args:
        residuals (Sequence[np.ndarray], optional): Precomputed out-of-bag residuals per member.
    """
    check_percentile_resamples(ens.B)
    if residuals is None:
        residuals = oob_residuals(ens, train)
    sample = adjusted_predictions(ens, x, residuals, make_rng(seed))
    return percentile_interval(sample, alpha)

"""Experiment runner: repeated test splits, every configured method on every test point."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from src.config.settings import ConfigConstants, ConformityKind, MethodName
from src.core.data import kfold_split, load_csv, train_test_split
from src.core.exceptions import ConfigError, MethodError
from src.core.models import Dataset, GridPlan, PredictionInterval, PValueTable
from src.core.synthetic import generate
from src.core.utils import derive_seed, make_rng, parallel_map
from src.evaluation.ledger import BurdenLedger
from src.evaluation.metrics import (
    PiOutcome,
    conditional_coverage,
    coverage_and_width,
    replicate_summary,
)
from src.harness.config import DatasetSource, ExperimentConfig, MethodSpec, SweepConfig
from src.learners import LearnerSpec
from src.methods import bootstrap, conformal
from src.methods.kde import AUTO

logger = logging.getLogger(__name__)

GRID_LABEL = 'grid-calibration'


@dataclass
class MethodResult:
    """Intervals produced by one method in one replicate."""

    label: str
    outcomes: List[PiOutcome]
    trainings: int
    tables: List[PValueTable] = field(default_factory=list)

    @property
    def rmse(self) -> float:
        errors = [o.interval.center - o.true_target for o in self.outcomes if o.interval.center is not None]
        return float(math.sqrt(np.mean(np.square(errors)))) if errors else math.nan


@dataclass
class ExperimentReport:
    """Per-replicate rows, per-method aggregates and the failures met along the way."""

    dataset: str
    learner: LearnerSpec
    alpha: float
    grid_half_width: Optional[float]
    rows: List[dict] = field(default_factory=list)
    outcomes: Dict[str, List[PiOutcome]] = field(default_factory=dict)
    per_replicate: Dict[Tuple[str, int], List[PiOutcome]] = field(default_factory=dict)
    tables: Dict[Tuple[str, int], List[PValueTable]] = field(default_factory=dict)
    failures: Dict[str, List[str]] = field(default_factory=dict)
    conditional_edges: Optional[List[float]] = None

    def methods_without_results(self) -> List[str]:
        return sorted(label for label, outcomes in self.outcomes.items() if not outcomes)

    def aggregate(self) -> dict:
        """Replicate means with standard errors across replicate means, plus pooled hit counts."""
        methods = {}
        for label, outcomes in self.outcomes.items():
            rows = [r for r in self.rows if r['method'] == label]
            entry = {'replicates': len(rows), 'failures': self.failures.get(label, [])}
            if rows:
                coverage, width, se_coverage, se_width = replicate_summary(
                    [r['coverage'] for r in rows], [r['mean_width'] for r in rows]
                )
                entry.update({
                    'coverage': coverage,
                    'mean_width': width,
                    'se_coverage': se_coverage,
                    'se_width': se_width,
                    'trainings': [r['trainings'] for r in rows],
                    'empty_count': int(sum(r['empty_count'] for r in rows)),
                    'rmse': float(np.mean([r['rmse'] for r in rows])),
                    'pooled_hits': int(sum(o.hit for o in outcomes)),
                    'pooled_count': len(outcomes),
                })
                if self.conditional_edges:
                    keys = [o.interval.center for o in outcomes]
                    report = conditional_coverage(outcomes, keys, self.conditional_edges)
                    entry['conditional'] = report.as_records()
            methods[label] = entry
        return {
            'dataset': self.dataset,
            'learner': self.learner.to_json_block(),
            'alpha': self.alpha,
            'nominal': 1.0 - self.alpha,
            'grid_half_width': self.grid_half_width,
            'methods': methods,
        }


def load_dataset(source: DatasetSource) -> Dataset:
    if source.csv is not None:
        return load_csv(source.csv.path, source.csv.target_column, source.csv.header)
    return generate(source.generator).dataset


def estimate_half_width(learner: LearnerSpec, train: Dataset, alpha: float, seed: int,
                        ledger: Optional[BurdenLedger] = None) -> float:
    """
    Grid half-width W from one split-conformal run: the mean split interval width.

    With absolute-residual conformity every split interval has width 2 s*; when the
    calibration set is too small for a finite s*, the largest calibration score is used.
    """
    predictor = conformal.calibrate_split(learner, train, ConformityKind.ABSOLUTE_RESIDUAL, seed,
                                          ledger, GRID_LABEL)
    scores = predictor.sources[0].scores
    threshold = conformal.split_quantile(scores, alpha)
    if not math.isfinite(threshold) or threshold <= 0.0:
        threshold = float(scores.max()) or 1.0
    half_width = 2.0 * threshold
    logger.info(f"Grid half-width estimated from split conformal: {half_width:.6g}")
    return half_width


def _default_grid_size(method: MethodSpec, config: ExperimentConfig) -> int:
    if method.grid_size is not None:
        return method.grid_size
    if config.grid.M is not None:
        return config.grid.M
    if method.name is MethodName.FULL_CONFORMAL:
        return ConfigConstants.FULL_CONFORMAL_GRID_SIZE
    return ConfigConstants.CONFORMAL_GRID_SIZE


def run_method(method: MethodSpec, config: ExperimentConfig, learner: LearnerSpec, train: Dataset,
               test: Dataset, half_width: Optional[float], seed: int, ledger: BurdenLedger,
               workers: Optional[int] = None) -> MethodResult:
    """Build intervals for every test row with one method, charging its fits to `ledger`."""
    label = method.label
    alpha = config.alpha
    intervals: List[PredictionInterval] = []
    tables: List[PValueTable] = []

    if method.name is MethodName.PIVOT_BOOTSTRAP:
        ens = bootstrap.train_ensemble(learner, train, method.B, seed, ledger, label, workers)
        noise = bootstrap.irreducible_error(ens, train)
        intervals = [bootstrap.pivot_pi(ens, train, x, alpha, noise_variance=noise) for x in test.features]
    elif method.name is MethodName.PERCENTILE_BOOTSTRAP:
        bootstrap.check_percentile_resamples(method.B)
        ens = bootstrap.train_ensemble(learner, train, method.B, seed, ledger, label, workers)
        residuals = bootstrap.oob_residuals(ens, train)
        for i, x in enumerate(test.features):
            sample = bootstrap.adjusted_predictions(ens, x, residuals, make_rng(seed, i))
            intervals.append(bootstrap.percentile_interval(sample, alpha))
    else:
        if half_width is None:
            raise MethodError(f"{label} needs a grid half-width")
        plan = GridPlan(half_width, _default_grid_size(method, config))
        bandwidth = method.bandwidth if method.bandwidth is not None else AUTO
        options = {'ledger': ledger, 'label': label, 'bandwidth': bandwidth,
                   'inclusive': config.inclusive_p_values}
        if method.name is MethodName.SPLIT_CONFORMAL:
            predictor = conformal.calibrate_split(learner, train, method.measure, seed, **options)
        elif method.name is MethodName.CROSS_CONFORMAL:
            predictor = conformal.calibrate_cross(learner, train, method.K, method.measure, seed,
                                                  workers=workers, **options)
        elif method.name is MethodName.BOOTSTRAP_CONFORMAL:
            predictor = conformal.calibrate_bootstrap(learner, train, method.B, method.measure, seed,
                                                      workers=workers, **options)
        else:
            predictor = conformal.FullConformal(learner, train, method.measure, seed, workers=workers, **options)
        for x in test.features:
            interval, table = predictor.interval(x, plan, alpha)
            intervals.append(interval)
            if config.export_p_values:
                tables.append(table)

    outcomes = [PiOutcome.score(interval, y) for interval, y in zip(intervals, test.targets)]
    return MethodResult(label, outcomes, ledger.trainings(label), tables)


def check_split_sizes(config: ExperimentConfig, data: Dataset) -> None:
    """Reject split settings the loaded dataset cannot satisfy."""
    cv_folds = getattr(config, 'cv_folds', None)
    if cv_folds:
        if cv_folds > data.n:
            raise ConfigError(f"cv_folds={cv_folds} exceeds the {data.n} dataset rows")
    elif config.test_count >= data.n:
        raise ConfigError(f"test_count={config.test_count} leaves no training rows out of {data.n}")


def replicate_splits(config: ExperimentConfig, data: Dataset) -> Iterator[Tuple[int, Dataset, Dataset]]:
    """(replicate, train, test) triples: random test splits, or K-fold pairs for a cross-validated sweep."""
    cv_folds = getattr(config, 'cv_folds', None)
    if cv_folds:
        folds = kfold_split(data.n, cv_folds, derive_seed(config.seed, 0))
        for k in range(cv_folds):
            yield k, data.subset(folds.retained(k)), data.subset(folds.held_out(k))
        return
    for r in range(config.replicates):
        train, test = train_test_split(data, config.test_count, derive_seed(config.seed, r, 0))
        yield r, train, test


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None,
                   data: Optional[Dataset] = None) -> ExperimentReport:
    """
    Run every configured method over every replicate.

    Failures of a method in one replicate are logged and recorded; the method's other
    replicates still run.
    """
    data = data if data is not None else load_dataset(config.dataset)
    check_split_sizes(config, data)
    splits = list(replicate_splits(config, data))
    needs_grid = any(m.name in (MethodName.SPLIT_CONFORMAL, MethodName.CROSS_CONFORMAL,
                                MethodName.BOOTSTRAP_CONFORMAL, MethodName.FULL_CONFORMAL)
                     for m in config.methods)
    half_width = None
    if needs_grid:
        if config.grid.half_width == 'AUTO':
            half_width = estimate_half_width(config.learner, splits[0][1], config.alpha,
                                             derive_seed(config.seed, 0, 0, 1))
        else:
            half_width = float(config.grid.half_width)

    report = ExperimentReport(
        dataset=config.dataset.label,
        learner=config.learner,
        alpha=config.alpha,
        grid_half_width=half_width,
        outcomes={m.label: [] for m in config.methods},
        conditional_edges=config.conditional.edges if config.conditional else None,
    )

    for replicate, train, test in splits:
        ledger = BurdenLedger()

        def execute(indexed: Tuple[int, MethodSpec]):
            index, method = indexed
            seed = derive_seed(config.seed, replicate, index + 1)
            try:
                return run_method(method, config, config.learner, train, test, half_width, seed, ledger)
            except Exception as e:
                logger.error(f"Method {method.label} failed in replicate {replicate}: {e}", exc_info=True)
                return f"replicate {replicate}: {e}"

        results = parallel_map(execute, list(enumerate(config.methods)), workers)
        for method, result in zip(config.methods, results):
            if isinstance(result, str):
                report.failures.setdefault(method.label, []).append(result)
                continue
            summary = coverage_and_width(result.outcomes)
            report.rows.append({
                'method': method.label,
                'dataset': report.dataset,
                'replicate': replicate,
                'coverage': summary.coverage,
                'mean_width': summary.mean_width,
                'se_coverage': summary.se_coverage,
                'se_width': summary.se_width,
                'trainings': result.trainings,
                'empty_count': summary.empty_count,
                'rmse': result.rmse,
            })
            report.outcomes[method.label].extend(result.outcomes)
            report.per_replicate[(method.label, replicate)] = result.outcomes
            if result.tables:
                report.tables[(method.label, replicate)] = result.tables
        logger.info(f"Replicate {replicate} finished: {ledger.total()} trainings")
    return report


def run_sweep(config: SweepConfig, workers: Optional[int] = None) -> List[Tuple[LearnerSpec, ExperimentReport]]:
    """Run the experiment once per design point of the hyperparameter grid."""
    data = load_dataset(config.dataset)
    reports = []
    for i, learner in enumerate(config.design_points()):
        logger.info(f"Design point {i}: {learner.label()}")
        if learner.mlp is not None and not learner.mlp.in_design_space():
            logger.warning(f"{learner.label()} lies outside the benchmark architecture grid")
        point = config.model_copy(update={'learner': learner})
        reports.append((learner, run_experiment(point, workers, data)))
    return reports

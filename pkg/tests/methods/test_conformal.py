import math

import numpy as np
import pytest

from src.config.settings import ConformityKind
from src.core.data import bootstrap_resample, kfold_split
from src.core.exceptions import FitError, MethodError
from src.core.models import Dataset, GridPlan
from src.core.synthetic import GeneratorSpec, NoiseSpec, generate
from src.core.utils import make_rng
from src.evaluation.ledger import BurdenLedger
from src.evaluation.metrics import PiOutcome, agresti_coull_valid, coverage_and_width
from src.learners import LearnerSpec, fit
from src.methods import conformal
from src.methods.kde import fit_kde

ABS = ConformityKind.ABSOLUTE_RESIDUAL
KDE = ConformityKind.KDE_NEG_LOG_DENSITY


class TestPValues:
    def test_strict_and_inclusive_forms(self):
        reference = [1.0, 2.0, 3.0]
        assert conformal.p_value(reference, 2.5) == pytest.approx(0.25)
        assert conformal.p_value(reference, 2.5, inclusive=True) == pytest.approx(0.5)
        assert conformal.p_value(reference, 2.0) == pytest.approx(0.25)
        assert conformal.p_value(reference, 2.0, inclusive=True) == pytest.approx(0.75)
        assert conformal.p_value(reference, 0.0) == pytest.approx(0.75)
        assert conformal.p_value(reference, 9.0, inclusive=True) == pytest.approx(0.25)

    def test_empty_reference(self):
        with pytest.raises(MethodError):
            conformal.p_value([], 1.0)

    def test_split_quantile_bounds(self):
        assert conformal.split_quantile([1.0, 2.0], alpha=0.7) == -math.inf
        assert conformal.split_quantile([1.0, 2.0], alpha=0.1, inclusive=True) == math.inf
        assert conformal.split_quantile(np.arange(1.0, 20.0), alpha=0.1) == 18.0


class TestConformityMeasure:
    def test_absolute_residual(self):
        measure = conformal.ConformityMeasure.fit(ABS, [0.0])
        assert conformal.conformity_score(measure, 2.0, 5.5) == pytest.approx(3.5)

    def test_kde_scores_negative_log_density(self):
        measure = conformal.ConformityMeasure.fit(KDE, [-1.0, 0.0, 1.0], bandwidth=1.0)
        kde = fit_kde([-1.0, 0.0, 1.0], bandwidth=1.0)
        assert conformal.conformity_score(measure, 0.0, 0.0) == pytest.approx(-math.log(kde.density(0.0)[0]))
        assert conformal.conformity_score(measure, 1.0, 4.0) == pytest.approx(-math.log(kde.density(3.0)[0]))

    def test_kde_kind_needs_a_model(self):
        with pytest.raises(MethodError):
            conformal.ConformityMeasure(KDE)


class TestGrid:
    def test_build_grid(self):
        grid = conformal.build_grid(1.0, 2.0, 5)
        np.testing.assert_allclose(grid.values, [-1.0, 0.0, 1.0, 2.0, 3.0])
        assert grid.step == pytest.approx(1.0)

    def test_rejects_degenerate_grids(self):
        with pytest.raises(MethodError):
            conformal.build_grid(0.0, 0.0, 5)
        with pytest.raises(MethodError):
            conformal.build_grid(0.0, 1.0, 1)

    def test_interval_is_hull_of_accepted(self):
        grid = conformal.build_grid(0.0, 2.0, 5)
        interval = conformal.interval_from_p_values(grid, np.array([0.0, 0.5, 0.01, 0.5, 0.0]), 0.1, 0.0)
        assert (interval.lower, interval.upper) == (-1.0, 1.0)
        np.testing.assert_allclose(interval.accepted_candidates, [-1.0, 1.0])

    def test_empty_set(self):
        grid = conformal.build_grid(0.0, 1.0, 3)
        interval = conformal.interval_from_p_values(grid, np.zeros(3), 0.1, 0.0)
        assert interval.empty
        assert interval.width == 0.0
        assert not interval.contains(0.0)


class TestSplitConformal:
    def test_one_training(self, small_linear, ridge):
        ledger = BurdenLedger()
        predictor = conformal.calibrate_split(ridge, small_linear, ABS, seed=1, ledger=ledger, label='split')
        for x in small_linear.features[:5]:
            predictor.interval(x, GridPlan(3.0, 101), 0.1)
        assert ledger.trainings('split') == 1

    def test_single_point_wrapper(self, small_linear, ridge):
        ledger = BurdenLedger()
        interval, table = conformal.split_conformal_pi(ridge, small_linear, np.array([0.2]), GridPlan(3.0, 101),
                                                      0.1, ABS, seed=0, ledger=ledger)
        assert ledger.total() == 1
        assert interval.lower < interval.center < interval.upper
        assert table.per_candidate.shape == (101,)

    def test_tiny_calibration_gives_empty_sets(self, ridge):
        data = Dataset(np.array([[0.0], [1.0], [2.0], [3.0]]), np.array([0.0, 1.1, 1.9, 3.2]))
        interval, _ = conformal.split_conformal_pi(ridge, data, np.array([1.5]), GridPlan(5.0, 51), 0.7, ABS, seed=0)
        assert interval.empty
        assert math.isnan(interval.lower)

    @pytest.mark.parametrize('inclusive', [False, True])
    def test_p_values_lie_on_the_reference_lattice(self, small_linear, ridge, inclusive):
        predictor = conformal.calibrate_split(ridge, small_linear, ABS, seed=2, inclusive=inclusive)
        size = predictor.sources[0].scores.size
        table = predictor.p_value_table(np.array([0.1]), conformal.build_grid(1.0, 4.0, 301))
        scaled = table.per_candidate * (size + 1)
        np.testing.assert_allclose(scaled, np.round(scaled), atol=1e-9)
        assert table.per_candidate.min() >= 0.0
        assert table.per_candidate.max() <= (1.0 if inclusive else size / (size + 1))

    def test_needs_four_rows(self, ridge):
        data = Dataset(np.array([[0.0], [1.0], [2.0]]), np.array([0.0, 1.0, 2.0]))
        with pytest.raises(MethodError):
            conformal.calibrate_split(ridge, data, ABS, seed=0)

    @pytest.mark.parametrize('instance', range(25))
    def test_grid_matches_order_statistic_interval(self, instance):
        rng = make_rng(100, instance)
        n = int(rng.integers(8, 41))
        x = rng.uniform(-2.0, 2.0, size=(n, 1))
        y = 0.5 - x[:, 0] + rng.standard_normal(n)
        data = Dataset(x, y)
        spec = LearnerSpec.ridge_spec(float(rng.uniform(0.0, 1.0)))
        alpha = float(rng.choice([0.1, 0.2, 0.3]))
        predictor = conformal.calibrate_split(spec, data, ABS, seed=instance)
        scores = predictor.sources[0].scores
        threshold = conformal.split_quantile(scores, alpha)
        point = np.array([float(rng.uniform(-2.0, 2.0))])
        center = predictor.center(point)
        grid = conformal.build_grid(center, 2.0 * float(scores.max()) + 1.0, 2001)
        interval, _ = predictor.interval(point, grid, alpha)
        if threshold == -math.inf:
            assert interval.empty
            return
        assert abs(interval.lower - (center - threshold)) <= grid.step
        assert abs(interval.upper - (center + threshold)) <= grid.step


def _brute_force_table(sources, point, candidates):
    """Double loop over sources and candidates with an explicit count per pair."""
    table = []
    for model, calibration in sources:
        prediction = model.predict(point)
        reference = [abs(y - model.predict(x)) for x, y in zip(calibration.features, calibration.targets)]
        row = []
        for q in candidates:
            score = abs(q - prediction)
            row.append(sum(1 for r in reference if r > score) / (len(reference) + 1))
        table.append(row)
    return np.mean(np.array(table), axis=0)


class TestAggregatedMethods:
    @pytest.mark.parametrize('K', [2, 3])
    def test_cross_conformal_matches_brute_force(self, ridge, K):
        rng = make_rng(7, K)
        data = Dataset(rng.standard_normal((12, 2)), rng.standard_normal(12))
        point = np.array([0.1, -0.2])
        grid = conformal.build_grid(0.0, 3.0, 21)
        predictor = conformal.calibrate_cross(ridge, data, K, ABS, seed=5)
        table = predictor.p_value_table(point, grid)

        folds = kfold_split(data.n, K, 5)
        sources = [(fit(ridge, data.subset(folds.retained(k))), data.subset(folds.held_out(k))) for k in range(K)]
        np.testing.assert_allclose(table.per_candidate, _brute_force_table(sources, point, grid.values),
                                   rtol=0, atol=1e-15)
        assert table.per_source.shape == (K, 21)

    @pytest.mark.parametrize('B', [2, 3])
    def test_bootstrap_conformal_matches_brute_force(self, ridge, B):
        rng = make_rng(8, B)
        data = Dataset(rng.standard_normal((10, 1)), rng.standard_normal(10))
        point = np.array([0.4])
        grid = conformal.build_grid(0.0, 3.0, 21)
        resamples = [bootstrap_resample(data.n, 30 + b) for b in range(B)]
        predictor = conformal.calibrate_bootstrap(ridge, data, B, ABS, seed=0, resamples=resamples)
        table = predictor.p_value_table(point, grid)

        sources = [(fit(ridge, data.subset(r.in_bag_indices)), data.subset(r.out_of_bag_indices))
                   for r in resamples]
        np.testing.assert_allclose(table.per_candidate, _brute_force_table(sources, point, grid.values),
                                   rtol=0, atol=1e-15)

    def test_burden(self, small_linear, ridge):
        ledger = BurdenLedger()
        cross = conformal.calibrate_cross(ridge, small_linear, 5, ABS, seed=0, ledger=ledger, label='cross')
        boot = conformal.calibrate_bootstrap(ridge, small_linear, 7, ABS, seed=0, ledger=ledger, label='boot')
        for x in small_linear.features[:4]:
            cross.interval(x, GridPlan(3.0, 51), 0.1)
            boot.interval(x, GridPlan(3.0, 51), 0.1)
        assert ledger.snapshot() == {'cross': 5, 'boot': 7}

    def test_cross_fold_bounds(self, small_linear, ridge):
        with pytest.raises(MethodError):
            conformal.calibrate_cross(ridge, small_linear, 21, ABS, seed=0)

    def test_fold_failures_are_tagged(self):
        data = Dataset(np.arange(8.0).reshape(-1, 1), np.arange(8.0))
        with pytest.raises(FitError) as info:
            conformal.calibrate_cross(LearnerSpec.knn_spec(5), data, 2, ABS, seed=0)
        assert info.value.index == 0

    def test_kde_measure_per_source(self, linear_data):
        data = linear_data(n=80, d=1)
        predictor = conformal.calibrate_cross(LearnerSpec.ridge_spec(0.0), data, 4, KDE, seed=0)
        bandwidths = {s.measure.kde.bandwidth for s in predictor.sources}
        assert len(bandwidths) == 4
        interval, _ = predictor.interval(np.array([0.0]), GridPlan(6.0, 301), 0.1)
        assert not interval.empty

    def test_p_value_rows(self, small_linear, ridge):
        predictor = conformal.calibrate_cross(ridge, small_linear, 2, ABS, seed=0)
        table = predictor.p_value_table(np.array([0.0]), conformal.build_grid(0.0, 1.0, 3))
        rows = conformal.p_value_rows(table)
        assert len(rows) == 9
        assert [r[1] for r in rows[-3:]] == ['agg', 'agg', 'agg']


class TestFullConformal:
    def test_burden_with_plan_and_grid(self, small_linear, ridge):
        ledger = BurdenLedger()
        method = conformal.FullConformal(ridge, small_linear, ABS, seed=0, ledger=ledger, label='full')
        for x in small_linear.features[:3]:
            method.interval(x, GridPlan(3.0, 10), 0.1)
        assert ledger.trainings('full') == 3 * 10 + 1

        other = BurdenLedger()
        conformal.full_conformal_pi(ridge, small_linear, np.array([0.0]), conformal.build_grid(1.0, 3.0, 10),
                                    0.1, ABS, seed=0, ledger=other)
        assert other.total() == 10

    def test_candidate_p_value_refits_on_augmented_data(self, small_linear, ridge):
        method = conformal.FullConformal(ridge, small_linear, ABS, seed=0)
        x, q = np.array([0.3]), 2.0
        augmented = small_linear.with_row(x, q)
        model = fit(ridge, augmented)
        reference = np.abs(augmented.targets - model.predict_many(augmented.features))
        assert reference.size == small_linear.n + 1
        expected = np.sum(reference > abs(q - model.predict(x))) / (small_linear.n + 2)
        assert method.candidate_p_value(x, q) == pytest.approx(expected)

    def test_kde_measure_is_fit_on_augmented_residuals(self, small_linear, ridge):
        method = conformal.FullConformal(ridge, small_linear, KDE, seed=0)
        x, q = np.array([-0.2]), 0.5
        augmented = small_linear.with_row(x, q)
        model = fit(ridge, augmented)
        residuals = augmented.targets - model.predict_many(augmented.features)
        kde = fit_kde(residuals)
        reference = -kde.log_density(residuals)
        expected = np.sum(reference > reference[-1]) / (small_linear.n + 2)
        assert method.candidate_p_value(x, q) == pytest.approx(expected)

    def test_single_row_nearest_neighbour_gives_empty_sets(self):
        train = Dataset(np.array([[0.0]]), np.array([0.0]))
        grid = conformal.build_grid(0.0, 1.0, 11)
        interval, table = conformal.full_conformal_pi(LearnerSpec.knn_spec(1), train, np.array([0.0]), grid,
                                                      0.1, ABS, seed=0)
        np.testing.assert_array_equal(table.per_candidate, np.zeros(11))
        assert interval.empty

    def test_interval_covers_center(self, small_linear, ridge):
        interval, table = conformal.full_conformal_pi(ridge, small_linear, np.array([0.0]), GridPlan(3.0, 61),
                                                      0.1, ABS, seed=0)
        assert interval.lower <= interval.center <= interval.upper
        assert table.per_candidate.max() > 0.5


@pytest.mark.slow
def test_split_conformal_coverage_is_valid():
    ridge = LearnerSpec.ridge_spec(0.0)
    hits = count = 0
    for r in range(50):
        data = generate(GeneratorSpec(n=598, d=2, noise=NoiseSpec(sigma=1.0), seed=r), truth_seed=0).dataset
        train, test = data.subset(range(498)), data.subset(range(498, 598))
        predictor = conformal.calibrate_split(ridge, train, ABS, seed=r)
        outcomes = [PiOutcome.score(predictor.interval(x, GridPlan(6.0, 4001), 0.1)[0], y)
                    for x, y in zip(test.features, test.targets)]
        summary = coverage_and_width(outcomes)
        hits += summary.hits
        count += summary.count
    assert agresti_coull_valid(hits, count, 0.90).valid


@pytest.mark.slow
def test_split_p_values_are_sub_uniform():
    rng = make_rng(2024)
    x_train = rng.standard_normal(500)
    model = fit(LearnerSpec.ridge_spec(0.0),
                Dataset(x_train.reshape(-1, 1), 1.0 + 2.0 * x_train + rng.standard_normal(500)))
    p_values = np.empty(5000)
    for t in range(5000):
        x = rng.standard_normal(501)
        y = 1.0 + 2.0 * x + rng.standard_normal(501)
        scores = np.abs(y - model.predict_many(x.reshape(-1, 1)))
        p_values[t] = conformal.p_value(scores[:500], scores[500])
    for alpha in (0.05, 0.1, 0.2):
        assert np.mean(p_values <= alpha) <= alpha + 2.0 / math.sqrt(5000)


@pytest.mark.slow
def test_kde_conformity_narrows_skewed_intervals():
    ridge = LearnerSpec.ridge_spec(0.0)
    widths = {ABS: [], KDE: []}
    outcomes = {ABS: [], KDE: []}
    for r in range(20):
        spec = GeneratorSpec(n=1100, d=1, noise=NoiseSpec(kind='skewed', sigma=1.0, shape=1.0), seed=r)
        data = generate(spec, truth_seed=0).dataset
        train, test = data.subset(range(1000)), data.subset(range(1000, 1100))
        for kind in (ABS, KDE):
            predictor = conformal.calibrate_cross(ridge, train, 10, kind, seed=r)
            scored = [PiOutcome.score(predictor.interval(x, GridPlan(5.0, 401), 0.1)[0], y)
                      for x, y in zip(test.features, test.targets)]
            widths[kind].append(coverage_and_width(scored).mean_width)
            outcomes[kind].extend(scored)
    assert np.mean(widths[KDE]) <= np.mean(widths[ABS])
    pooled = coverage_and_width(outcomes[KDE])
    assert agresti_coull_valid(pooled.hits, pooled.count, 0.90).valid


@pytest.mark.parametrize('method', ['split', 'cross', 'bootstrap', 'full'])
def test_accepted_sets_are_nested_in_alpha(small_linear, ridge, method):
    x = np.array([0.4])
    grid = conformal.build_grid(1.8, 3.0, 61)
    if method == 'full':
        table = conformal.FullConformal(ridge, small_linear, ABS, seed=3).interval(x, grid, 0.1)[1]
    else:
        predictor = {
            'split': lambda: conformal.calibrate_split(ridge, small_linear, ABS, seed=3),
            'cross': lambda: conformal.calibrate_cross(ridge, small_linear, 5, ABS, seed=3),
            'bootstrap': lambda: conformal.calibrate_bootstrap(ridge, small_linear, 8, ABS, seed=3),
        }[method]()
        table = predictor.p_value_table(x, grid)
    accepted = [
        set(conformal.interval_from_p_values(grid, table.per_candidate, alpha, 1.8).accepted_candidates)
        for alpha in (0.05, 0.1, 0.2, 0.4)
    ]
    for wider, narrower in zip(accepted, accepted[1:]):
        assert narrower <= wider
    assert accepted[0]

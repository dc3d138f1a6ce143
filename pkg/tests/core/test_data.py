import numpy as np
import pytest

from src.core.data import (
    Standardizer,
    bootstrap_resample,
    kfold_split,
    load_csv,
    split_indices,
    train_test_split,
)
from src.core.exceptions import DatasetError, ResampleError
from src.core.models import Dataset


def _write(tmp_path, text, name='data.csv'):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return path


class TestLoadCsv:
    def test_header_and_named_target(self, tmp_path):
        path = _write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n7,8.5,9\n")
        data = load_csv(path, 'y')
        assert (data.n, data.d) == (3, 2)
        assert data.feature_names == ('a', 'b')
        assert data.target_name == 'y'
        np.testing.assert_array_equal(data.targets, [3.0, 6.0, 9.0])
        np.testing.assert_array_equal(data.features[2], [7.0, 8.5])

    def test_target_by_index_without_header(self, tmp_path):
        path = _write(tmp_path, "10,1,2\n20,3,4\n")
        data = load_csv(path, 0, header=False)
        np.testing.assert_array_equal(data.targets, [10.0, 20.0])
        np.testing.assert_array_equal(data.features, [[1.0, 2.0], [3.0, 4.0]])
        assert data.feature_names is None

    def test_non_numeric_cell_reports_row_and_column(self, tmp_path):
        path = _write(tmp_path, "a,y\n1,2\n3,oops\n")
        with pytest.raises(DatasetError) as info:
            load_csv(path, 'y')
        assert info.value.row == 2
        assert info.value.column == 'y'
        assert 'oops' in str(info.value)

    def test_missing_cell_is_rejected(self, tmp_path):
        path = _write(tmp_path, "a,y\n1,\n")
        with pytest.raises(DatasetError):
            load_csv(path, 'y')

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match='not found'):
            load_csv(tmp_path / 'absent.csv', 'y')

    def test_empty_file(self, tmp_path):
        with pytest.raises(DatasetError, match='empty'):
            load_csv(_write(tmp_path, ''), 'y')

    def test_absent_target(self, tmp_path):
        path = _write(tmp_path, "a,b\n1,2\n")
        with pytest.raises(DatasetError, match='absent'):
            load_csv(path, 'y')
        with pytest.raises(DatasetError, match='absent'):
            load_csv(path, 5)


class TestDataset:
    def test_arrays_are_read_only(self, small_linear):
        with pytest.raises(ValueError):
            small_linear.features[0, 0] = 1.0

    def test_rejects_non_finite_values(self):
        with pytest.raises(DatasetError):
            Dataset(np.array([[1.0], [np.nan]]), np.array([1.0, 2.0]))

    def test_rejects_row_mismatch(self):
        with pytest.raises(DatasetError, match='mismatch'):
            Dataset(np.ones((3, 2)), np.ones(2))

    def test_with_row_appends(self, small_linear):
        augmented = small_linear.with_row(np.array([0.5]), 9.0)
        assert augmented.n == small_linear.n + 1
        assert augmented.targets[-1] == 9.0


class TestSplits:
    def test_train_test_partition(self, small_linear):
        train, test = train_test_split(small_linear, 10, seed=1)
        assert (train.n, test.n) == (30, 10)
        train_idx, test_idx = split_indices(40, 10, seed=1)
        assert set(train_idx).isdisjoint(test_idx)
        assert sorted([*train_idx, *test_idx]) == list(range(40))

    def test_split_is_seeded(self):
        a = split_indices(50, 5, seed=4)
        b = split_indices(50, 5, seed=4)
        np.testing.assert_array_equal(a[1], b[1])

    def test_test_count_bounds(self):
        with pytest.raises(ResampleError):
            split_indices(10, 10, seed=0)


class TestBootstrapResample:
    def test_out_of_bag_is_complement(self):
        resample = bootstrap_resample(30, seed=5)
        assert resample.in_bag_indices.size == 30
        assert resample.out_of_bag_indices.size > 0
        assert set(resample.out_of_bag_indices).isdisjoint(resample.in_bag_indices)
        assert set(resample.out_of_bag_indices) | set(resample.in_bag_indices) == set(range(30))

    def test_reproducible(self):
        a = bootstrap_resample(20, seed=9)
        b = bootstrap_resample(20, seed=9)
        np.testing.assert_array_equal(a.in_bag_indices, b.in_bag_indices)

    def test_tiny_sample_rejected(self):
        with pytest.raises(ResampleError):
            bootstrap_resample(1, seed=0)

    def test_mean_out_of_bag_fraction(self):
        n = 1000
        fractions = [bootstrap_resample(n, seed=s).out_of_bag_indices.size / n for s in range(1000)]
        assert np.mean(fractions) == pytest.approx((1.0 - 1.0 / n) ** n, abs=0.01)


class TestKfold:
    def test_fold_sizes_differ_by_at_most_one(self):
        folds = kfold_split(23, 5, seed=2)
        sizes = folds.sizes()
        assert sizes.sum() == 23
        assert sizes.max() - sizes.min() <= 1

    def test_held_out_and_retained_partition(self):
        folds = kfold_split(12, 3, seed=0)
        for k in range(3):
            held, kept = folds.held_out(k), folds.retained(k)
            assert set(held).isdisjoint(kept)
            assert len(held) + len(kept) == 12

    def test_k_bounds(self):
        with pytest.raises(ResampleError):
            kfold_split(5, 6, seed=0)
        with pytest.raises(ResampleError):
            kfold_split(5, 1, seed=0)


def test_standardizer_keeps_constant_columns_finite():
    features = np.array([[1.0, 3.0], [2.0, 3.0], [3.0, 3.0]])
    scaler = Standardizer.fit(features)
    transformed = scaler.transform(features)
    np.testing.assert_allclose(transformed[:, 0].mean(), 0.0, atol=1e-12)
    np.testing.assert_allclose(transformed[:, 0].std(), 1.0)
    np.testing.assert_array_equal(transformed[:, 1], 0.0)

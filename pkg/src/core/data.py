import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd

from src.config.settings import ConfigConstants
from src.core.exceptions import DatasetError, ResampleError
from src.core.models import BootstrapResample, Dataset, FoldAssignment
from src.core.utils import make_rng

logger = logging.getLogger(__name__)


def load_csv(path: Union[str, Path], target_column: Union[str, int], header: bool = True) -> Dataset:
    """
    Load a numeric CSV file into a Dataset.

    Args:
        path (str | Path): CSV file, UTF-8, comma separated, '.' decimals.
        target_column (str | int): Target column name, or its 0-based position.
        header (bool): Whether the first line holds column names.

    Returns:
        Dataset: Features in file column order with the target column removed.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"data file not found: {path}")
    try:
        frame = pd.read_csv(
            path,
            header=0 if header else None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            encoding='utf-8',
        )
    except pd.errors.EmptyDataError as e:
        raise DatasetError(f"empty data file: {path}") from e
    if frame.empty:
        raise DatasetError(f"empty data file: {path}")

    numeric = frame.apply(lambda column: pd.to_numeric(column.str.strip(), errors='coerce'))
    values = numeric.to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row, col = (int(i) for i in np.argwhere(bad)[0])
        column = frame.columns[col]
        raise DatasetError(
            f"non-numeric cell {frame.iat[row, col]!r} at row {row + 1}, column {column}",
            row=row + 1,
            column=column,
        )

    names = [str(c) for c in frame.columns]
    if isinstance(target_column, int) and not (header and str(target_column) in names):
        if not 0 <= target_column < len(names):
            raise DatasetError(f"target column {target_column} absent: file has {len(names)} columns")
        target_idx = target_column
    else:
        if str(target_column) not in names:
            raise DatasetError(f"target column {target_column!r} absent from {names}")
        target_idx = names.index(str(target_column))
    if len(names) < 2:
        raise DatasetError("file needs at least one feature column besides the target")

    feature_idx = [i for i in range(len(names)) if i != target_idx]
    dataset = Dataset(
        features=values[:, feature_idx],
        targets=values[:, target_idx],
        feature_names=tuple(names[i] for i in feature_idx) if header else None,
        target_name=names[target_idx] if header else None,
    )
    logger.info(f"Loaded {path.name}: n={dataset.n}, d={dataset.d}")
    return dataset


def split_indices(n: int, test_count: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded (train, test) index partition with exactly `test_count` test rows."""
    if not 1 <= test_count < n:
        raise ResampleError(f"test_count must lie in [1, {n - 1}], got {test_count}")
    order = make_rng(seed).permutation(n)
    return np.sort(order[test_count:]), np.sort(order[:test_count])


def train_test_split(data: Dataset, test_count: int, seed: int) -> Tuple[Dataset, Dataset]:
    """Randomly remove `test_count` rows as the test set; the rest is the training set."""
    train_idx, test_idx = split_indices(data.n, test_count, seed)
    return data.subset(train_idx), data.subset(test_idx)


def bootstrap_resample(n: int, seed: int) -> BootstrapResample:
    """
    Draw n rows with replacement and record the out-of-bag rows.

    A draw with an empty out-of-bag set is redrawn with seed + attempt, up to
    ConfigConstants.RESAMPLE_ATTEMPTS times.
    """
    if n < 2:
        raise ResampleError(f"bootstrap resampling needs n >= 2, got {n}")
    for attempt in range(ConfigConstants.RESAMPLE_ATTEMPTS):
        in_bag = make_rng(seed + attempt).integers(0, n, size=n)
        drawn = np.zeros(n, dtype=bool)
        drawn[in_bag] = True
        out_of_bag = np.flatnonzero(~drawn)
        if out_of_bag.size:
            if attempt:
                logger.warning(f"Resample with seed {seed} redrawn {attempt} time(s) for a non-empty out-of-bag set")
            return BootstrapResample(in_bag, out_of_bag)
    raise ResampleError(
        f"no non-empty out-of-bag set after {ConfigConstants.RESAMPLE_ATTEMPTS} draws (n={n}, seed={seed})"
    )


def kfold_split(n: int, K: int, seed: int) -> FoldAssignment:
    """Shuffle rows and deal them round-robin into K folds."""
    if not 2 <= K <= n:
        raise ResampleError(f"K must lie in [2, {n}], got {K}")
    order = make_rng(seed).permutation(n)
    fold_of_row = np.empty(n, dtype=np.int64)
    fold_of_row[order] = np.arange(n) % K
    return FoldAssignment(fold_of_row, K)


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-score fitted on training rows; constant columns keep unit scale."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> 'Standardizer':
        features = np.asarray(features, dtype=float)
        mean = features.mean(axis=0)
        scale = features.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.mean) / self.scale

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from src.core.exceptions import DatasetError


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


def _frozen_index(array: Sequence[int]) -> np.ndarray:
    array = np.array(array, dtype=np.int64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Dataset:
    """Represents a feature matrix with its continuous target vector."""

    features: np.ndarray
    targets: np.ndarray
    feature_names: Optional[Tuple[str, ...]] = None
    target_name: Optional[str] = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        targets = np.asarray(self.targets, dtype=float).reshape(-1)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise DatasetError(f"features must be a non-empty n x d matrix, got shape {features.shape}")
        if features.shape[0] != targets.shape[0]:
            raise DatasetError(
                f"row count mismatch: {features.shape[0]} feature rows vs {targets.shape[0]} targets"
            )
        if not np.all(np.isfinite(features)) or not np.all(np.isfinite(targets)):
            raise DatasetError("dataset contains NaN or infinite values")
        if self.feature_names is not None and len(self.feature_names) != features.shape[1]:
            raise DatasetError(
                f"{len(self.feature_names)} feature names given for {features.shape[1]} columns"
            )
        object.__setattr__(self, 'features', _frozen(features))
        object.__setattr__(self, 'targets', _frozen(targets))
        if self.feature_names is not None:
            object.__setattr__(self, 'feature_names', tuple(self.feature_names))

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices: Sequence[int]) -> 'Dataset':
        """Rows at `indices`, repeats allowed (bootstrap in-bag sets)."""
        rows = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[rows], self.targets[rows], self.feature_names, self.target_name)

    def with_row(self, x: np.ndarray, y: float) -> 'Dataset':
        """Dataset augmented with one extra (x, y) observation."""
        features = np.vstack([self.features, np.asarray(x, dtype=float).reshape(1, -1)])
        targets = np.append(self.targets, float(y))
        return Dataset(features, targets, self.feature_names, self.target_name)


@dataclass(frozen=True)
class BootstrapResample:
    """In-bag rows drawn with replacement and the out-of-bag complement."""

    in_bag_indices: np.ndarray
    out_of_bag_indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'in_bag_indices', _frozen_index(self.in_bag_indices))
        object.__setattr__(self, 'out_of_bag_indices', _frozen_index(self.out_of_bag_indices))

    @property
    def n(self) -> int:
        return int(self.in_bag_indices.size)


@dataclass(frozen=True)
class FoldAssignment:
    """Fold label of every row; fold sizes differ by at most one."""

    fold_of_row: np.ndarray
    K: int

    def __post_init__(self):
        object.__setattr__(self, 'fold_of_row', _frozen_index(self.fold_of_row))

    def held_out(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_row == fold)

    def retained(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_row != fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of_row, minlength=self.K)


@dataclass(frozen=True)
class CandidateGrid:
    """M evenly spaced candidate targets on [center - half_width, center + half_width]."""

    values: np.ndarray
    center: float
    half_width: float

    def __post_init__(self):
        object.__setattr__(self, 'values', _frozen(self.values))

    @property
    def M(self) -> int:
        return int(self.values.size)

    @property
    def step(self) -> float:
        return 2.0 * self.half_width / (self.M - 1)


@dataclass(frozen=True)
class GridPlan:
    """Grid width and size; the center is taken from the method's own point prediction."""

    half_width: float
    size: int


@dataclass(frozen=True)
class PivotComponents:
    bagged_prediction: float
    prediction_variance: float
    irreducible_error: float
    z_critical: float

    @property
    def half_width(self) -> float:
        return self.z_critical * float(np.sqrt(self.prediction_variance + self.irreducible_error))


@dataclass(frozen=True)
class AdjustedPredictionSample:
    """Member predictions, their sampled out-of-bag errors and the adjusted values g_b."""

    predictions: np.ndarray
    sampled_errors: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class PredictionInterval:
    """
    Lower/upper bounds at nominal level 1 - alpha.

    Empty conformal sets keep `empty=True` with NaN bounds; for conformal methods the
    bounds are the hull of `accepted_candidates`.
    """

    lower: float
    upper: float
    level: float
    center: Optional[float] = None
    accepted_candidates: Optional[np.ndarray] = None
    empty: bool = False
    pivot: Optional[PivotComponents] = None
    adjusted: Optional[AdjustedPredictionSample] = None

    @property
    def width(self) -> float:
        return 0.0 if self.empty else float(self.upper - self.lower)

    def contains(self, y: float) -> bool:
        return (not self.empty) and self.lower <= y <= self.upper


@dataclass(frozen=True)
class PValueTable:
    """Conformal p-values per candidate; `per_source` holds the K x M (or B x M) matrix."""

    candidates: np.ndarray
    per_candidate: np.ndarray
    per_source: Optional[np.ndarray] = field(default=None)

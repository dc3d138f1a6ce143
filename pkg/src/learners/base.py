import logging
from abc import ABC, abstractmethod
from typing import Callable, Dict, Optional

import numpy as np

from src.config.settings import LearnerKind
from src.core.data import Standardizer
from src.core.exceptions import DimensionError, FitError
from src.core.models import Dataset
from src.learners.spec import LearnerSpec

logger = logging.getLogger(__name__)


class Regressor(ABC):
    """Trained predictor f-hat; immutable once fitted."""

    def __init__(self, spec: LearnerSpec, training_row_count: int, dimension: int,
                 standardizer: Optional[Standardizer] = None):
        self.spec = spec
        self.training_row_count = training_row_count
        self.dimension = dimension
        self.standardizer = standardizer

    def _prepare(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.ndim == 1:
            features = features.reshape(1, -1)
        if features.shape[1] != self.dimension:
            raise DimensionError(
                f"expected feature vectors of dimension {self.dimension}, got {features.shape[1]}"
            )
        if self.standardizer is not None:
            features = self.standardizer.transform(features)
        return features

    def predict(self, x: np.ndarray) -> float:
        """Prediction for a single feature vector."""
        return float(self.predict_many(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def predict_many(self, features: np.ndarray) -> np.ndarray:
        """Predictions for every row of `features`."""
        return self._predict_rows(self._prepare(features))

    @abstractmethod
    def _predict_rows(self, features: np.ndarray) -> np.ndarray:
        """Predict already-validated, already-standardized rows."""


_TRAINERS: Dict[LearnerKind, Callable[[LearnerSpec, np.ndarray, np.ndarray, Optional[Standardizer]], Regressor]] = {}


def register(kind: LearnerKind):
    def decorator(trainer):
        _TRAINERS[kind] = trainer
        return trainer
    return decorator


def fit(spec: LearnerSpec, train: Dataset) -> Regressor:
    """
    Train the learner described by `spec` on `train`.

    Args:
        spec (LearnerSpec): Learner kind and hyperparameters.
        train (Dataset): Training rows.

    Returns:
        Regressor: The fitted model.
    """
    if train.n < 1:
        raise FitError("cannot fit on an empty dataset")
    standardizer = Standardizer.fit(train.features) if spec.uses_standardization else None
    features = standardizer.transform(train.features) if standardizer is not None else train.features
    trainer = _TRAINERS[spec.kind]
    model = trainer(spec, features, train.targets, standardizer)
    logger.debug(f"Fitted {spec.label()} on {train.n} rows")
    return model


def predict(model: Regressor, x: np.ndarray) -> float:
    """Scalar prediction of `model` at feature vector `x`."""
    return model.predict(x)

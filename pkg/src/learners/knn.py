from typing import Optional

import numpy as np

from src.config.settings import LearnerKind
from src.core.data import Standardizer
from src.core.exceptions import FitError
from src.learners.base import Regressor, register
from src.learners.spec import LearnerSpec


class KnnRegressor(Regressor):
    """Mean target of the k nearest training rows (Euclidean; ties go to the lower row index)."""

    def __init__(self, spec: LearnerSpec, features: np.ndarray, targets: np.ndarray,
                 standardizer: Optional[Standardizer]):
        super().__init__(spec, features.shape[0], features.shape[1], standardizer)
        self.features = features.copy()
        self.targets = targets.copy()
        self.k = spec.knn.k

    def _predict_rows(self, features: np.ndarray) -> np.ndarray:
        dist = ((features[:, None, :] - self.features[None, :, :]) ** 2).sum(axis=2)
        nearest = np.argsort(dist, axis=1, kind='stable')[:, :self.k]
        return self.targets[nearest].mean(axis=1)


@register(LearnerKind.KNN)
def train_knn(spec: LearnerSpec, features: np.ndarray, targets: np.ndarray,
              standardizer: Optional[Standardizer]) -> KnnRegressor:
    if spec.knn.k > features.shape[0]:
        raise FitError(f"knn needs k <= n, got k={spec.knn.k} with n={features.shape[0]}")
    return KnnRegressor(spec, features, targets, standardizer)

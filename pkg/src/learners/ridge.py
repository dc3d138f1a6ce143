from typing import Optional

import numpy as np

from src.config.settings import LearnerKind
from src.core.data import Standardizer
from src.learners.base import Regressor, register
from src.learners.spec import LearnerSpec


class RidgeRegressor(Regressor):
    """Linear model with an unpenalized intercept."""

    def __init__(self, spec: LearnerSpec, coef: np.ndarray, intercept: float, n: int,
                 standardizer: Optional[Standardizer]):
        super().__init__(spec, n, coef.size, standardizer)
        self.coef = coef
        self.intercept = intercept

    def _predict_rows(self, features: np.ndarray) -> np.ndarray:
        return self.intercept + features @ self.coef


def solve_ridge(features: np.ndarray, targets: np.ndarray, lambda_: float):
    """
    Solve the penalized normal equations on centered data.

    (Xc' Xc + lambda I) beta = Xc' yc, intercept = mean(y) - mean(X) beta.
    Falls back to least squares when the system is singular (lambda = 0, d > n).
    """
    x_mean = features.mean(axis=0)
    y_mean = float(targets.mean())
    xc = features - x_mean
    yc = targets - y_mean
    gram = xc.T @ xc + lambda_ * np.eye(features.shape[1])
    rhs = xc.T @ yc
    try:
        coef = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        coef = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    return coef, y_mean - float(x_mean @ coef)


@register(LearnerKind.RIDGE)
def train_ridge(spec: LearnerSpec, features: np.ndarray, targets: np.ndarray,
                standardizer: Optional[Standardizer]) -> RidgeRegressor:
    coef, intercept = solve_ridge(features, targets, spec.ridge.lambda_)
    return RidgeRegressor(spec, coef, intercept, features.shape[0], standardizer)

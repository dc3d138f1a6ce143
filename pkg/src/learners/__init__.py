from src.learners import knn, mlp, ridge
from src.learners.base import Regressor, fit, predict
from src.learners.spec import KnnParams, LearnerSpec, MlpParams, RidgeParams

__all__ = [
    'KnnParams',
    'LearnerSpec',
    'MlpParams',
    'Regressor',
    'RidgeParams',
    'fit',
    'knn',
    'mlp',
    'predict',
    'ridge',
]

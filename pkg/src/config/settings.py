import os
from dataclasses import dataclass
from enum import Enum

from dotenv import load_dotenv

load_dotenv()


def _int_env(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or not value.strip():
        return default
    return max(1, int(value))


class EnvSettings:
    PIF_WORKERS = _int_env('PIF_WORKERS', 1)
    PIF_LOG_LEVEL = os.getenv('PIF_LOG_LEVEL', 'INFO')


class LearnerKind(str, Enum):
    """Built-in learning algorithms."""
    RIDGE = 'ridge'
    KNN = 'knn'
    MLP = 'mlp'


class Activation(str, Enum):
    RELU = 'relu'
    TANH = 'tanh'
    SIGMOID = 'sigmoid'


class ConformityKind(str, Enum):
    """Conformity measures available to every conformal method."""
    ABSOLUTE_RESIDUAL = 'absolute_residual'
    KDE_NEG_LOG_DENSITY = 'kde_neg_log_density'


class MethodName(str, Enum):
    """Prediction-interval methods the harness can run."""
    PIVOT_BOOTSTRAP = 'pivot-bootstrap'
    PERCENTILE_BOOTSTRAP = 'percentile-bootstrap'
    SPLIT_CONFORMAL = 'split-conformal'
    CROSS_CONFORMAL = 'cross-conformal'
    BOOTSTRAP_CONFORMAL = 'bootstrap-conformal'
    FULL_CONFORMAL = 'full-conformal'


class GeneratorKind(str, Enum):
    LINEAR = 'linear'
    SINUSOID = 'sinusoid'
    FRIEDMAN_LIKE = 'friedman-like'


class NoiseKind(str, Enum):
    GAUSSIAN = 'gaussian'
    SKEWED = 'skewed'
    BIMODAL = 'bimodal'


@dataclass(frozen=True)
class ConfigConstants:
    RESAMPLE_ATTEMPTS: int = 16
    PERCENTILE_MIN_RESAMPLES: int = 20
    PERCENTILE_RECOMMENDED_RESAMPLES: int = 1000
    FULL_CONFORMAL_GRID_SIZE: int = 100
    CONFORMAL_GRID_SIZE: int = 1000
    FULL_CONFORMAL_WARN_FITS: int = 50_000
    VALIDITY_ALPHA: float = 0.05
    KDE_ZERO_VARIANCE_SCALE: float = 1e-3
    SILVERMAN_FACTOR: float = 1.06
    ADAM_BETA1: float = 0.9
    ADAM_BETA2: float = 0.999
    ADAM_EPSILON: float = 1e-8
    QUANTILE_TOLERANCE: float = 1e-9
    CSV_FLOAT_FORMAT: str = '%.10g'
    AGGREGATE_FILE: str = 'aggregate.json'
    REPORT_FILE: str = 'report.csv'

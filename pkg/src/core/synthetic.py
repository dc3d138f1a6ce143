from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config.settings import GeneratorKind, NoiseKind
from src.core.models import Dataset
from src.core.utils import make_rng


class NoiseSpec(BaseModel):
    """Additive noise shape: gaussian(sigma), skewed(shape) or bimodal(gap)."""

    model_config = ConfigDict(frozen=True)

    kind: NoiseKind = NoiseKind.GAUSSIAN
    sigma: float = Field(default=1.0, ge=0.0)
    shape: float = Field(default=1.0, gt=0.0)
    gap: float = Field(default=4.0, ge=0.0)


class GeneratorSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: GeneratorKind = GeneratorKind.LINEAR
    n: int = Field(ge=10)
    d: int = Field(default=1, ge=1)
    noise: NoiseSpec = NoiseSpec()
    seed: int = 0

    @model_validator(mode='after')
    def _check_dimension(self) -> 'GeneratorSpec':
        if self.kind is GeneratorKind.FRIEDMAN_LIKE and self.d < 5:
            raise ValueError("friedman-like generator needs d >= 5")
        return self


@dataclass(frozen=True)
class SyntheticDataset:
    """Generated data together with its noise-free regression function and noise draws."""

    dataset: Dataset
    truth: Callable[[np.ndarray], np.ndarray]
    noise: np.ndarray


def _linear_truth(d: int, seed: int) -> Callable[[np.ndarray], np.ndarray]:
    rng = make_rng(seed, 0)
    coef = rng.uniform(-2.0, 2.0, size=d)
    intercept = float(rng.uniform(-1.0, 1.0))
    return lambda X: intercept + np.asarray(X, dtype=float) @ coef


def _sinusoid_truth(X: np.ndarray) -> np.ndarray:
    return np.sin(2.0 * np.pi * np.asarray(X, dtype=float)[:, 0])


def _friedman_truth(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return (
        10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20.0 * (X[:, 2] - 0.5) ** 2
        + 10.0 * X[:, 3]
        + 5.0 * X[:, 4]
    )


def draw_noise(noise: NoiseSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """Mean-zero noise of the requested shape; gaussian and skewed have standard deviation sigma."""
    if noise.kind is NoiseKind.GAUSSIAN:
        return noise.sigma * rng.standard_normal(size)
    if noise.kind is NoiseKind.SKEWED:
        draws = rng.gamma(noise.shape, 1.0, size)
        return noise.sigma * (draws - noise.shape) / np.sqrt(noise.shape)
    side = np.where(rng.random(size) < 0.5, -0.5, 0.5) * noise.gap
    return side + noise.sigma * rng.standard_normal(size)


def generate(spec: GeneratorSpec, truth_seed: Optional[int] = None) -> SyntheticDataset:
    """
    Draw spec.n i.i.d. rows from the generator.

    Args:
        spec (GeneratorSpec): Generator kind, size, noise shape and seed.
        truth_seed (int, optional): Seed of the regression function itself (linear
            coefficients); defaults to spec.seed. Fixing it while varying spec.seed
            draws fresh samples from one fixed population.

    Returns:
        SyntheticDataset: Dataset plus the ground-truth function and the noise draws.
    """
    rng = make_rng(spec.seed, 1)
    if spec.kind is GeneratorKind.LINEAR:
        features = rng.standard_normal((spec.n, spec.d))
        truth = _linear_truth(spec.d, spec.seed if truth_seed is None else truth_seed)
    elif spec.kind is GeneratorKind.SINUSOID:
        features = rng.uniform(0.0, 1.0, (spec.n, spec.d))
        truth = _sinusoid_truth
    else:
        features = rng.uniform(0.0, 1.0, (spec.n, spec.d))
        truth = _friedman_truth
    noise = draw_noise(spec.noise, spec.n, rng)
    targets = truth(features) + noise
    return SyntheticDataset(Dataset(features, targets), truth, noise)

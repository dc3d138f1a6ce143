import json

import numpy as np
import pytest

from src.core.models import Dataset
from src.core.synthetic import GeneratorSpec, NoiseSpec, generate
from src.learners import LearnerSpec


@pytest.fixture
def ridge():
    return LearnerSpec.ridge_spec(0.1)


@pytest.fixture
def small_linear():
    """Forty noisy rows of y = 1 + 2 x."""
    rng = np.random.default_rng(7)
    x = rng.uniform(-1.0, 1.0, size=(40, 1))
    y = 1.0 + 2.0 * x[:, 0] + 0.3 * rng.standard_normal(40)
    return Dataset(x, y)


@pytest.fixture
def linear_data():
    def make(n=200, sigma=1.0, seed=0, d=2):
        return generate(GeneratorSpec(n=n, d=d, noise=NoiseSpec(sigma=sigma), seed=seed)).dataset
    return make


@pytest.fixture
def write_config(tmp_path):
    def write(config: dict, name: str = 'config.json'):
        path = tmp_path / name
        path.write_text(json.dumps(config), encoding='utf-8')
        return path
    return write


@pytest.fixture
def base_config(tmp_path):
    return {
        'dataset': {'generator': {'kind': 'linear', 'n': 120, 'd': 2, 'seed': 3}},
        'learner': {'kind': 'ridge', 'ridge': {'lambda': 0.1}},
        'methods': [
            {'name': 'split-conformal'},
            {'name': 'cross-conformal', 'K': 5},
        ],
        'alpha': 0.1,
        'test_count': 20,
        'replicates': 2,
        'grid': {'M': 201, 'half_width': 'AUTO'},
        'seed': 11,
        'output_dir': str(tmp_path / 'out'),
    }

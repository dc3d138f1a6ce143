import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from src.config.settings import Activation, ConfigConstants, LearnerKind
from src.core.data import Standardizer
from src.core.exceptions import FitError
from src.core.utils import make_rng
from src.learners.base import Regressor, register
from src.learners.spec import LearnerSpec

logger = logging.getLogger(__name__)

Layer = Tuple[np.ndarray, np.ndarray]


def _activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.RELU:
        return np.maximum(z, 0.0)
    if activation is Activation.TANH:
        return np.tanh(z)
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _activation_grad(z: np.ndarray, a: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.RELU:
        return (z > 0.0).astype(float)
    if activation is Activation.TANH:
        return 1.0 - a ** 2
    return a * (1.0 - a)


def init_params(d: int, layers: int, nodes: int, activation: Activation,
                rng: np.random.Generator) -> List[Layer]:
    """Fan-in scaled uniform weights (He for relu, Xavier otherwise), zero biases."""
    sizes = [d] + [nodes] * layers + [1]
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        if activation is Activation.RELU:
            limit = math.sqrt(6.0 / fan_in)
        else:
            limit = math.sqrt(6.0 / (fan_in + fan_out))
        params.append((rng.uniform(-limit, limit, (fan_in, fan_out)), np.zeros(fan_out)))
    return params


def forward(params: List[Layer], features: np.ndarray, activation: Activation):
    """Network output and the (pre-activation, activation) cache of every layer."""
    cache = [(None, features)]
    a = features
    for W, b in params[:-1]:
        z = a @ W + b
        a = _activate(z, activation)
        cache.append((z, a))
    W, b = params[-1]
    return (a @ W + b)[:, 0], cache


def loss_and_gradient(params: List[Layer], features: np.ndarray, targets: np.ndarray,
                      activation: Activation) -> Tuple[float, List[Layer]]:
    """Mean squared error and its gradient with respect to every weight and bias."""
    output, cache = forward(params, features, activation)
    residual = output - targets
    loss = float(np.mean(residual ** 2))
    delta = (2.0 / targets.size) * residual[:, None]
    grads: List[Layer] = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        a_prev = cache[i][1]
        grads[i] = (a_prev.T @ delta, delta.sum(axis=0))
        if i:
            z, a = cache[i]
            delta = (delta @ W.T) * _activation_grad(z, a, activation)
    return loss, grads


class AdamOptimizer:
    """Adam with bias-corrected first and second moment estimates."""

    def __init__(self, params: List[Layer], learning_rate: float,
                 beta1: float = ConfigConstants.ADAM_BETA1,
                 beta2: float = ConfigConstants.ADAM_BETA2,
                 epsilon: float = ConfigConstants.ADAM_EPSILON):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.steps = 0
        self._m = [np.zeros_like(p) for layer in params for p in layer]
        self._v = [np.zeros_like(p) for layer in params for p in layer]

    def step(self, params: List[Layer], grads: List[Layer]) -> List[Layer]:
        self.steps += 1
        flat_params = [p for layer in params for p in layer]
        flat_grads = [g for layer in grads for g in layer]
        updated = []
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps
        for i, (p, g) in enumerate(zip(flat_params, flat_grads)):
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * g * g
            m_hat = self._m[i] / correction1
            v_hat = self._v[i] / correction2
            updated.append(p - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon))
        return [(updated[2 * i], updated[2 * i + 1]) for i in range(len(params))]


class MlpRegressor(Regressor):
    """Fully connected network trained under MSE loss; targets are rescaled internally."""

    def __init__(self, spec: LearnerSpec, params: List[Layer], target_mean: float, target_scale: float,
                 n: int, d: int, standardizer: Optional[Standardizer], steps: int, final_loss: float):
        super().__init__(spec, n, d, standardizer)
        self.params = params
        self.target_mean = target_mean
        self.target_scale = target_scale
        self.steps = steps
        self.final_loss = final_loss

    def _predict_rows(self, features: np.ndarray) -> np.ndarray:
        output, _ = forward(self.params, features, self.spec.mlp.activation)
        return self.target_mean + self.target_scale * output


@register(LearnerKind.MLP)
def train_mlp(spec: LearnerSpec, features: np.ndarray, targets: np.ndarray,
              standardizer: Optional[Standardizer]) -> MlpRegressor:
    """
    Train with Adam for exactly epochs * ceil(n / batch_size) steps.

    Rows are reshuffled every epoch from the spec seed; the last short batch is kept.
    """
    cfg = spec.mlp
    n, d = features.shape
    rng = make_rng(cfg.seed)
    params = init_params(d, cfg.layers, cfg.nodes_per_layer, cfg.activation, rng)
    optimizer = AdamOptimizer(params, cfg.learning_rate)

    target_mean = float(targets.mean())
    target_scale = float(targets.std()) or 1.0
    scaled = (targets - target_mean) / target_scale

    loss = math.nan
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grads = loss_and_gradient(params, features[batch], scaled[batch], cfg.activation)
            if not math.isfinite(loss):
                raise FitError(f"non-finite training loss at epoch {epoch}", epoch=epoch)
            params = optimizer.step(params, grads)
            epoch_loss += loss * batch.size
        loss = epoch_loss / n
        logger.debug(f"epoch {epoch}: mse={loss:.6f}")
    return MlpRegressor(spec, params, target_mean, target_scale, n, d, standardizer,
                        optimizer.steps, loss)

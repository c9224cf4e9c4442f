"""Network building blocks: parameters, perceptrons, Adam, one-cycle LR.

Every dense block in the model is a depth-2 perceptron
(Linear - SiLU - Linear) whose hidden width equals the model hidden
dimension; one knob sizes them all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ShapeMismatchError

_ACTIVATIONS = {
    "linear": lambda t: t,
    "relu": ad.relu,
    "sigmoid": ad.sigmoid,
    "silu": ad.silu,
}


class Parameter:
    """A trainable tensor with its Adam state (moments + step count)."""

    def __init__(self, name: str, data: np.ndarray):
        self.name = name
        self.tensor = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self.adam_m = np.zeros_like(self.tensor.data)
        self.adam_v = np.zeros_like(self.tensor.data)
        self.step_count = 0

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @data.setter
    def data(self, value: np.ndarray) -> None:
        if value.shape != self.tensor.data.shape:
            raise ShapeMismatchError(
                f"{self.name}: cannot assign shape {value.shape} over {self.tensor.data.shape}"
            )
        self.tensor.data = np.asarray(value, dtype=np.float64)

    @property
    def grad(self):
        return self.tensor.grad

    def zero_grad(self) -> None:
        self.tensor.grad = None

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.tensor.data.shape})"


@dataclass(frozen=True)
class OptimConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 500
    warmup_fraction: float = 0.3  # one-cycle: linear ramp over this share of steps
    peak_multiplier: float = 10.0  # ... up to this multiple of the base rate
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.warmup_fraction < 1.0:
            raise ConfigError(f"warmup fraction must lie in (0, 1), got {self.warmup_fraction}")
        if self.peak_multiplier < 1.0:
            raise ConfigError(f"peak multiplier must be >= 1, got {self.peak_multiplier}")


def one_cycle_lr(config: OptimConfig, step: int, total_steps: int) -> float:
    """Effective rate at 1-based ``step``: linear warm-up from the base rate
    to peak over the warm-up fraction, cosine decay to zero afterwards."""
    base = config.learning_rate
    peak = base * config.peak_multiplier
    t = (step - 1) / max(total_steps - 1, 1)
    if t <= config.warmup_fraction:
        return base + (peak - base) * (t / config.warmup_fraction)
    tail = (t - config.warmup_fraction) / (1.0 - config.warmup_fraction)
    return peak * 0.5 * (1.0 + math.cos(math.pi * tail))


def adam_step(params, config: OptimConfig, step: int, total_steps: int | None = None) -> None:
    """One bias-corrected Adam update over ``params`` using their .grad.

    With ``total_steps`` the one-cycle schedule sets the effective rate;
    without it the base rate applies. Parameters with no recorded gradient
    are treated as zero-gradient.
    """
    lr = one_cycle_lr(config, step, total_steps) if total_steps else config.learning_rate
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        p.step_count += 1
        p.adam_m = config.beta1 * p.adam_m + (1.0 - config.beta1) * g
        p.adam_v = config.beta2 * p.adam_v + (1.0 - config.beta2) * g * g
        m_hat = p.adam_m / (1.0 - config.beta1**p.step_count)
        v_hat = p.adam_v / (1.0 - config.beta2**p.step_count)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + config.eps)


def mlp_forward(x: Tensor, layers) -> Tensor:
    """Apply (W, b, activation) layers in order: x = act(x @ W + b)."""
    for weight, bias, activation in layers:
        w = weight.tensor if isinstance(weight, Parameter) else weight
        b = bias.tensor if isinstance(bias, Parameter) else bias
        x = _ACTIVATIONS[activation](ad.add(ad.matmul(x, w), b))
    return x


class MLP:
    """Dense perceptron; default depth 2 with SiLU between the layers."""

    def __init__(self, name: str, dims: list[int], rng: np.random.Generator,
                 activation: str = "silu", final_activation: str = "linear"):
        if len(dims) < 2:
            raise ConfigError(f"{name}: need at least input and output dims, got {dims}")
        self.name = name
        self.layers: list[tuple[Parameter, Parameter, str]] = []
        for k in range(len(dims) - 1):
            fan_in, fan_out = dims[k], dims[k + 1]
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            w = Parameter(f"{name}.w{k}", rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            b = Parameter(f"{name}.b{k}", np.zeros(fan_out))
            act = activation if k < len(dims) - 2 else final_activation
            self.layers.append((w, b, act))

    def __call__(self, x: Tensor) -> Tensor:
        return mlp_forward(x, self.layers)

    def parameters(self) -> list[Parameter]:
        return [p for w, b, _ in self.layers for p in (w, b)]


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared error over a batch vector."""
    pred, target = ad._as_tensor(pred), ad._as_tensor(target)
    if pred.data.shape != target.data.shape:
        raise ShapeMismatchError(f"mse shapes {pred.data.shape} vs {target.data.shape}")
    diff = ad.sub(pred, target)
    return ad.scale(ad.sum_all(ad.mul(diff, diff)), 1.0 / max(pred.data.size, 1))


def mae(pred: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean(np.abs(np.asarray(pred) - np.asarray(target))))

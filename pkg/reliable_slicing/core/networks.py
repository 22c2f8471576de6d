#!/usr/bin/env python3
"""
Dense Feed-forward Networks

Fixed-topology multilayer perceptrons with explicit forward and backward
passes, adaptive-moment and plain gradient optimizers, soft target tracking,
finite-difference gradient checking and a JSON checkpoint container.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import CheckpointError, ShapeMismatchError, StaleCacheError

logger = logging.getLogger(__name__)

ACTIVATIONS = ('relu', 'sigmoid', 'identity')
CHECKPOINT_FORMAT_VERSION = 1


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == 'relu':
        return np.maximum(z, 0.0)
    if kind == 'sigmoid':
        # tanh form stays finite for large |z|
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return z


def _activation_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == 'relu':
        return (z > 0.0).astype(np.float64)
    if kind == 'sigmoid':
        return a * (1.0 - a)
    return np.ones_like(z)


@dataclass
class DenseLayer:
    """Affine map followed by an element-wise activation."""

    weights: np.ndarray  # (fan_in, fan_out)
    biases: np.ndarray   # (fan_out,)
    activation: str = 'identity'

    def __post_init__(self) -> None:
        if self.activation not in ACTIVATIONS:
            raise ShapeMismatchError(f"unknown activation '{self.activation}', expected one of {ACTIVATIONS}")
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64).reshape(-1)
        if self.weights.ndim != 2 or self.weights.shape[1] != self.biases.shape[0]:
            raise ShapeMismatchError(
                f'weights {self.weights.shape} do not match biases {self.biases.shape}')


@dataclass
class GradientTape:
    """Per-parameter gradients mirroring a DenseNet's layers."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @classmethod
    def zeros_like(cls, net: 'DenseNet') -> 'GradientTape':
        return cls([np.zeros_like(layer.weights) for layer in net.layers],
                   [np.zeros_like(layer.biases) for layer in net.layers])

    def arrays(self) -> List[np.ndarray]:
        out: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for g in self.arrays())))

    def scaled(self, factor: float) -> 'GradientTape':
        return GradientTape([w * factor for w in self.weights], [b * factor for b in self.biases])

    def flatten(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.arrays()])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in self.arrays())


class DenseNet:
    """Chain of DenseLayers evaluated on a vector or a batch of row vectors."""

    def __init__(self, layers: Sequence[DenseLayer]):
        if not layers:
            raise ShapeMismatchError('a network needs at least one layer')
        for previous, current in zip(layers, layers[1:]):
            if previous.weights.shape[1] != current.weights.shape[0]:
                raise ShapeMismatchError(
                    f'layer output {previous.weights.shape[1]} does not feed input {current.weights.shape[0]}')
        self.layers: List[DenseLayer] = list(layers)
        self._cache: Optional[Tuple[np.ndarray, List[np.ndarray], List[np.ndarray]]] = None

    @classmethod
    def build(cls, sizes: Sequence[int], rng: np.random.Generator,
              hidden_activation: str = 'relu', output_activation: str = 'identity',
              final_scale: Optional[float] = None) -> 'DenseNet':
        """Randomly initialised network with uniform fan-in scaling.

        Args:
            sizes: Layer widths from input to output, e.g. (3, 64, 64, 1)
            rng: Initialisation random stream
            hidden_activation: Activation of every layer but the last
            output_activation: Activation of the last layer
            final_scale: If given, last-layer parameters are drawn in [-final_scale, final_scale]
        """
        layers = []
        count = len(sizes) - 1
        for index, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = index == count - 1
            limit = final_scale if (last and final_scale is not None) else 1.0 / np.sqrt(fan_in)
            layers.append(DenseLayer(
                weights=rng.uniform(-limit, limit, size=(fan_in, fan_out)),
                biases=rng.uniform(-limit, limit, size=fan_out),
                activation=output_activation if last else hidden_activation,
            ))
        return cls(layers)

    @property
    def input_dim(self) -> int:
        return int(self.layers[0].weights.shape[0])

    @property
    def output_dim(self) -> int:
        return int(self.layers[-1].weights.shape[1])

    def _as_batch(self, inputs: np.ndarray) -> Tuple[np.ndarray, bool]:
        x = np.asarray(inputs, dtype=np.float64)
        single = x.ndim == 1
        batch = x.reshape(1, -1) if single else x
        if batch.ndim != 2 or batch.shape[1] != self.input_dim:
            raise ShapeMismatchError(f'input of shape {x.shape} does not match input_dim {self.input_dim}')
        return batch, single

    def forward(self, inputs: np.ndarray, cache: bool = True) -> np.ndarray:
        """Evaluate the network; caches activations for a following backward()."""
        batch, single = self._as_batch(inputs)
        pre_activations: List[np.ndarray] = []
        activations: List[np.ndarray] = [batch]
        a = batch
        for layer in self.layers:
            z = a @ layer.weights + layer.biases
            a = _activate(z, layer.activation)
            pre_activations.append(z)
            activations.append(a)
        if cache:
            self._cache = (batch.copy(), pre_activations, activations)
        return a[0] if single else a

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        """Forward pass that leaves the backward cache untouched."""
        return self.forward(inputs, cache=False)

    def backward(self, inputs: np.ndarray, seed_grad: np.ndarray) -> Tuple[GradientTape, np.ndarray]:
        """Reverse-mode gradients of sum(seed_grad * output).

        Returns:
            Tape of parameter gradients (summed over rows) and the input gradient
        """
        batch, single = self._as_batch(inputs)
        if self._cache is None or not np.array_equal(self._cache[0], batch):
            raise StaleCacheError('backward() needs a forward() on the same inputs first')
        _, pre_activations, activations = self._cache
        grad = np.asarray(seed_grad, dtype=np.float64).reshape(batch.shape[0], self.output_dim)

        tape = GradientTape.zeros_like(self)
        for index in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[index]
            dz = grad * _activation_grad(pre_activations[index], activations[index + 1], layer.activation)
            tape.weights[index] = activations[index].T @ dz
            tape.biases[index] = dz.sum(axis=0)
            grad = dz @ layer.weights.T
        return tape, (grad[0] if single else grad)

    def parameters(self) -> List[np.ndarray]:
        out: List[np.ndarray] = []
        for layer in self.layers:
            out.extend((layer.weights, layer.biases))
        return out

    def invalidate(self) -> None:
        """Drop cached activations (parameters changed)."""
        self._cache = None

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())

    def copy(self) -> 'DenseNet':
        return DenseNet([DenseLayer(layer.weights.copy(), layer.biases.copy(), layer.activation)
                         for layer in self.layers])

    def shapes(self) -> List[Tuple[int, int]]:
        return [tuple(layer.weights.shape) for layer in self.layers]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'shapes': [list(shape) for shape in self.shapes()],
            'layers': [
                {
                    'activation': layer.activation,
                    'weights': layer.weights.tolist(),
                    'biases': layer.biases.tolist(),
                }
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DenseNet':
        layers = [DenseLayer(np.array(entry['weights'], dtype=np.float64).reshape(shape),
                             np.array(entry['biases'], dtype=np.float64),
                             entry['activation'])
                  for entry, shape in zip(data['layers'], data['shapes'])]
        return cls(layers)


def _clip(tape: GradientTape, clip_norm: Optional[float]) -> GradientTape:
    if clip_norm is None:
        return tape
    norm = tape.global_norm()
    if norm > clip_norm:
        return tape.scaled(clip_norm / norm)
    return tape


class AdamOptimizer:
    """Adaptive-moment optimizer with bias correction and global-norm clipping.

    Args:
        net: Network whose parameters are updated in place
        lr: Learning rate
        beta1: Decay of the first moment
        beta2: Decay of the second moment
        eps: Denominator floor
        clip_norm: Gradients with a larger global norm are rescaled to it
    """

    name = 'adam'

    def __init__(self, net: DenseNet, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, clip_norm: Optional[float] = None):
        if lr <= 0:
            raise ValueError(f'learning rate must be positive, got {lr}')
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self.m = [np.zeros_like(p) for p in net.parameters()]
        self.v = [np.zeros_like(p) for p in net.parameters()]

    def step(self, net: DenseNet, tape: GradientTape) -> None:
        """Descend along `tape` (the gradient of a loss)."""
        grads = _clip(tape, self.clip_norm).arrays()
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for param, grad, m, v in zip(net.parameters(), grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            param -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
        net.invalidate()

    def state_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'lr': self.lr, 't': self.t,
                'm': [m.tolist() for m in self.m], 'v': [v.tolist() for v in self.v]}

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        self.t = int(state['t'])
        self.m = [np.array(m, dtype=np.float64).reshape(ref.shape) for m, ref in zip(state['m'], self.m)]
        self.v = [np.array(v, dtype=np.float64).reshape(ref.shape) for v, ref in zip(state['v'], self.v)]


class SGDOptimizer:
    """Plain gradient descent with the same interface as AdamOptimizer."""

    name = 'sgd'

    def __init__(self, net: DenseNet, lr: float, clip_norm: Optional[float] = None):
        if lr <= 0:
            raise ValueError(f'learning rate must be positive, got {lr}')
        self.lr = lr
        self.clip_norm = clip_norm
        self.t = 0

    def step(self, net: DenseNet, tape: GradientTape) -> None:
        self.t += 1
        for param, grad in zip(net.parameters(), _clip(tape, self.clip_norm).arrays()):
            param -= self.lr * grad
        net.invalidate()

    def state_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'lr': self.lr, 't': self.t}

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        self.t = int(state['t'])


Optimizer = Union[AdamOptimizer, SGDOptimizer]


def make_optimizer(name: str, net: DenseNet, lr: float, clip_norm: Optional[float] = None) -> Optimizer:
    if name == 'adam':
        return AdamOptimizer(net, lr, clip_norm=clip_norm)
    if name == 'sgd':
        return SGDOptimizer(net, lr, clip_norm=clip_norm)
    raise ValueError(f"unknown optimizer '{name}'")


def soft_update(target: DenseNet, online: DenseNet, phi: float) -> DenseNet:
    """Polyak tracking: target <- phi * online + (1 - phi) * target, in place."""
    if target.shapes() != online.shapes():
        raise ShapeMismatchError(f'target {target.shapes()} and online {online.shapes()} differ')
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f'phi must lie in [0, 1], got {phi}')
    for t_param, o_param in zip(target.parameters(), online.parameters()):
        t_param *= 1.0 - phi
        t_param += phi * o_param
    target.invalidate()
    return target


def numerical_gradient(objective: Callable[[DenseNet], float], net: DenseNet,
                       eps: float = 1e-5) -> GradientTape:
    """Central finite differences of a scalar objective w.r.t. every parameter."""
    tape = GradientTape.zeros_like(net)
    for param, grad in zip(net.parameters(), tape.arrays()):
        flat_param = param.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat_param.size):
            original = flat_param[i]
            flat_param[i] = original + eps
            upper = objective(net)
            flat_param[i] = original - eps
            lower = objective(net)
            flat_param[i] = original
            flat_grad[i] = (upper - lower) / (2.0 * eps)
    net.invalidate()
    return tape


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / (||a|| + ||n||), zero when both vanish."""
    analytic = np.ravel(analytic)
    numeric = np.ravel(numeric)
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def save_checkpoint(path: Union[str, Path], networks: Dict[str, DenseNet],
                    optimizers: Dict[str, Optimizer], extra: Optional[Dict[str, Any]] = None) -> Path:
    """Write networks, optimizer moments and extra scalars as one JSON container."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    container = {
        'format_version': CHECKPOINT_FORMAT_VERSION,
        'networks': {name: net.to_dict() for name, net in networks.items()},
        'optimizers': {name: opt.state_dict() for name, opt in optimizers.items()},
        'extra': extra or {},
    }
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(container, f)
    logger.info("Saved checkpoint to %s", path)
    return path


def load_checkpoint(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a container written by save_checkpoint.

    Returns:
        Dictionary with 'networks' (name -> DenseNet), 'optimizers'
        (name -> state dict) and 'extra'
    """
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            container = json.load(f)
    except FileNotFoundError:
        raise CheckpointError(f'no checkpoint at {path}')
    except json.JSONDecodeError as e:
        raise CheckpointError(f'checkpoint {path} is not valid JSON: {e}')
    if container.get('format_version') != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {container.get('format_version')}")
    return {
        'networks': {name: DenseNet.from_dict(data) for name, data in container['networks'].items()},
        'optimizers': container.get('optimizers', {}),
        'extra': container.get('extra', {}),
    }

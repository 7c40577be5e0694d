import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict

from models.utils.errors import ConfigurationError
from models.utils.validation import build_config

from . import functional as F
from .layers import AvgPool2d, BatchNorm2d, Conv2d, GlobalAvgPool, Linear, Module, ReLU, Tanh
from .types import Mode, Parameter

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-5


@dataclass
class GradCheckReport:
    """Relative error per checked tensor (inputs as ``input<i>``, parameters by name)."""

    errors: dict[str, float] = field(default_factory=dict)
    checked_entries: int = 0

    @property
    def max_rel_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def passed(self, tolerance: float = DEFAULT_TOLERANCE) -> bool:
        return self.max_rel_error <= tolerance


@dataclass
class GradTarget:
    """A differentiable unit under test: forward over a list of inputs, backward to input grads."""

    forward: Callable[[list[np.ndarray]], np.ndarray]
    backward: Callable[[np.ndarray], list[np.ndarray]]
    parameters: list[Parameter] = field(default_factory=list)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest per-entry ``|a - n| / max(|a|, |n|, 1e-8)``."""
    analytic, numeric = np.asarray(analytic, dtype=np.float64), np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / scale, initial=0.0))


def check_gradients(
    target: GradTarget,
    inputs: list[np.ndarray],
    seed: int,
    step: float = DEFAULT_STEP,
    max_entries: int | None = None,
    check_inputs: bool = True,
) -> GradCheckReport:
    """
    Compares ``target.backward`` against central differences of L = sum(out * P)
    for a fixed random projection P.

    ``max_entries`` samples that many coordinates per tensor instead of
    perturbing every one of them.
    """
    rng = np.random.default_rng(seed)
    out = target.forward(inputs)
    projection = rng.standard_normal(np.shape(out))

    for param in target.parameters:
        param.zero_grad()
    target.forward(inputs)
    input_grads = target.backward(np.asarray(projection, dtype=np.asarray(out).dtype))

    def evaluate() -> np.ndarray:
        return np.array(target.forward(inputs), dtype=np.float64)

    targets: list[tuple[str, np.ndarray, np.ndarray]] = []
    if check_inputs:
        targets += [(f'input{i}', x, g) for i, (x, g) in enumerate(zip(inputs, input_grads))]
    targets += [(p.name, p.value, p.grad.copy()) for p in target.parameters]

    report = GradCheckReport()
    for name, tensor, analytic in targets:
        if tensor.dtype != np.float64:
            raise ConfigurationError(f'gradient check needs float64 tensors, {name} is {tensor.dtype}')
        if max_entries is None or tensor.size <= max_entries:
            indices = np.arange(tensor.size)
        else:
            indices = rng.choice(tensor.size, size=max_entries, replace=False)
        numeric = np.empty(indices.size)
        flat = tensor.reshape(-1)
        for k, idx in enumerate(indices):
            original = flat[idx]
            flat[idx] = original + step
            plus = evaluate()
            flat[idx] = original - step
            minus = evaluate()
            flat[idx] = original
            # outputs the perturbation leaves untouched cancel exactly
            numeric[k] = float(np.sum((plus - minus) * projection)) / (2 * step)
        report.errors[name] = relative_error(analytic.reshape(-1)[indices], numeric)
        report.checked_entries += int(indices.size)

    logger.debug(f'gradient check: max relative error {report.max_rel_error:.3e} over {len(report.errors)} tensors')
    return report


class LayerSpec(BaseModel):
    model_config = ConfigDict(extra='forbid')

    kind: Literal[
        'conv2d',
        'batchnorm',
        'relu',
        'tanh',
        'linear',
        'avgpool2d',
        'global_avg_pool',
        'concat_channels',
        'softmax_cross_entropy',
    ]
    out_channels: int = 4
    kernel: int = 3
    stride: int = 1
    pad: int = 1
    out_features: int = 5
    window: int = 2
    num_classes: int = 6
    mode: Mode = Mode.TRAIN


def _single(layer: Module, mode: Mode) -> GradTarget:
    return GradTarget(
        forward=lambda xs: layer.forward(xs[0], mode),
        backward=lambda d: [layer.backward(d)],
        parameters=layer.parameters(),
    )


def build_target(spec: LayerSpec, input_shapes: Sequence[tuple[int, ...]], rng: np.random.Generator) -> GradTarget:
    first = input_shapes[0]
    if spec.kind == 'conv2d':
        layer = Conv2d(first[1], spec.out_channels, spec.kernel, rng, spec.stride, spec.pad, dtype=np.float64)
        return _single(layer, spec.mode)
    if spec.kind == 'batchnorm':
        layer = BatchNorm2d(first[1], dtype=np.float64)
        layer.gamma.value[...] = rng.normal(1.0, 0.5, first[1])
        layer.beta.value[...] = rng.normal(0.0, 0.5, first[1])
        if spec.mode is Mode.EVAL:
            layer.state.running_mean[...] = rng.normal(0.0, 1.0, first[1])
            layer.state.running_var[...] = rng.uniform(0.5, 2.0, first[1])
        return _single(layer, spec.mode)
    if spec.kind == 'linear':
        return _single(Linear(first[1], spec.out_features, rng, dtype=np.float64), spec.mode)
    if spec.kind == 'relu':
        return _single(ReLU(), spec.mode)
    if spec.kind == 'tanh':
        return _single(Tanh(), spec.mode)
    if spec.kind == 'avgpool2d':
        return _single(AvgPool2d(spec.window, spec.window), spec.mode)
    if spec.kind == 'global_avg_pool':
        return _single(GlobalAvgPool(), spec.mode)
    if spec.kind == 'concat_channels':
        cache = {}

        def concat_forward(xs):
            out, cache['widths'] = F.concat_channels(xs)
            return out

        return GradTarget(concat_forward, lambda d: F.concat_channels_backward(d, cache['widths']))

    labels = rng.integers(0, first[1], size=first[0])
    cache = {}

    def loss_forward(xs):
        loss, cache['grad'] = F.softmax_cross_entropy(xs[0], labels)
        return loss

    return GradTarget(loss_forward, lambda d: [cache['grad'] * d[:, None]])


def grad_check(
    layer_spec: LayerSpec | dict,
    input_shapes: Sequence[tuple[int, ...]],
    seed: int = 0,
    max_entries: int | None = None,
) -> GradCheckReport:
    """Finite-difference check of one primitive layer on random float64 inputs."""
    spec = layer_spec if isinstance(layer_spec, LayerSpec) else build_config(LayerSpec, layer_spec)
    if not input_shapes:
        raise ConfigurationError('grad_check needs at least one input shape')
    if spec.kind == 'softmax_cross_entropy' and spec.num_classes != input_shapes[0][1]:
        spec = spec.model_copy(update={'num_classes': input_shapes[0][1]})
    rng = np.random.default_rng(seed)
    target = build_target(spec, input_shapes, rng)
    inputs = [rng.standard_normal(shape) for shape in input_shapes]
    return check_gradients(target, inputs, seed, max_entries=max_entries)

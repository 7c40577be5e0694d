"""
Stateful layer objects wrapping the functional kernels.

Each layer keeps the cache of its most recent forward, so a model is run as
``forward`` followed by exactly one ``backward`` with the upstream gradient.
Parameter gradients are accumulated into ``Parameter.grad``.
"""

from collections.abc import Iterator

import numpy as np

from models.utils.errors import ConfigurationError

from . import functional as F
from .types import BatchNormState, Mode, Parameter


class Module:
    def __init__(self):
        self._children: list[tuple[str, 'Module']] = []
        self._params: list[Parameter] = []

    def add_module(self, name: str, module: 'Module') -> 'Module':
        self._children.append((name, module))
        return module

    def add_parameter(self, name: str, value: np.ndarray) -> Parameter:
        param = Parameter(name, value)
        self._params.append(param)
        return param

    def named_parameters(self, prefix: str = '') -> Iterator[tuple[str, Parameter]]:
        """Parameters in registration order: own first, then children depth-first."""
        for param in self._params:
            yield f'{prefix}{param.name}', param
        for name, child in self._children:
            yield from child.named_parameters(f'{prefix}{name}.')

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = '') -> Iterator[tuple[str, np.ndarray]]:
        for name, child in self._children:
            yield from child.named_buffers(f'{prefix}{name}.')

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        rng: np.random.Generator,
        stride: int = 1,
        pad: int = 0,
        dtype=np.float32,
    ):
        super().__init__()
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel, self.stride, self.pad = kernel, stride, pad
        fan_in = in_channels * kernel * kernel
        weight = rng.normal(0.0, np.sqrt(2.0 / fan_in), (out_channels, in_channels, kernel, kernel))
        self.weight = self.add_parameter('weight', weight.astype(dtype))
        self._cache = None

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        out, self._cache = F.conv2d(x, self.weight.value, self.stride, self.pad)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dx, dweight = F.conv2d_backward(dout, self._cache)
        self.weight.grad += dweight
        return dx


class BatchNorm2d(Module):
    def __init__(self, channels: int, dtype=np.float32):
        super().__init__()
        self.channels = channels
        self.gamma = self.add_parameter('gamma', np.ones(channels, dtype=dtype))
        self.beta = self.add_parameter('beta', np.zeros(channels, dtype=dtype))
        self.state = BatchNormState.fresh(channels, dtype)
        self._cache = None

    def named_buffers(self, prefix: str = '') -> Iterator[tuple[str, np.ndarray]]:
        yield f'{prefix}running_mean', self.state.running_mean
        yield f'{prefix}running_var', self.state.running_var

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        out, self._cache = F.batchnorm(x, self.gamma.value, self.beta.value, self.state, mode)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dx, dgamma, dbeta = F.batchnorm_backward(dout, self._cache)
        self.gamma.grad += dgamma
        self.beta.grad += dbeta
        return dx


class ReLU(Module):
    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        out, self._cache = F.relu(x)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return F.relu_backward(dout, self._cache)


class Tanh(Module):
    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        out, self._cache = F.tanh(x)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return F.tanh_backward(dout, self._cache)


class Linear(Module):
    """Fully connected layer; ``init_std=None`` selects fan-in scaled init."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        init_std: float | None = None,
        dtype=np.float32,
    ):
        super().__init__()
        if in_features < 1 or out_features < 1:
            raise ConfigurationError(f'linear dims must be positive, got {in_features}->{out_features}')
        self.in_features, self.out_features = in_features, out_features
        std = np.sqrt(1.0 / in_features) if init_std is None else init_std
        weight = rng.normal(0.0, std, (out_features, in_features))
        self.weight = self.add_parameter('weight', weight.astype(dtype))
        self.bias = self.add_parameter('bias', np.zeros(out_features, dtype=dtype))
        self._cache = None

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        out, self._cache = F.linear(x, self.weight.value, self.bias.value)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dx, dweight, dbias = F.linear_backward(dout, self._cache)
        self.weight.grad += dweight
        self.bias.grad += dbias
        return dx


class AvgPool2d(Module):
    def __init__(self, window: int = 2, stride: int = 2):
        super().__init__()
        self.window, self.stride = window, stride

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        out, self._cache = F.avgpool2d(x, self.window, self.stride)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return F.avgpool2d_backward(dout, self._cache)


class GlobalAvgPool(Module):
    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        out, self._cache = F.global_avg_pool(x)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return F.global_avg_pool_backward(dout, self._cache)


class Dropout(Module):
    def __init__(self, p: float, rng: np.random.Generator):
        super().__init__()
        self.p, self.rng = p, rng

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        out, self._cache = F.dropout(x, self.p, mode, self.rng)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return F.dropout_backward(dout, self._cache)


class Sequential(Module):
    def __init__(self, *layers: tuple[str, Module]):
        super().__init__()
        for name, layer in layers:
            self.add_module(name, layer)

    @property
    def layers(self) -> list[Module]:
        return [layer for _, layer in self._children]

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, mode)
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

import logging
from dataclasses import dataclass, field

import numpy as np

from models.tensor_autodiff.functional import concat_channels, split_channels
from models.tensor_autodiff.layers import AvgPool2d, BatchNorm2d, Conv2d, Module, ReLU, Sequential
from models.tensor_autodiff.types import Mode
from models.utils.errors import ConfigurationError

from .types import BackboneTaps, DenseNetConfig

logger = logging.getLogger(__name__)


class DenseLayer(Module):
    """BN-ReLU-Conv1x1(factor*k)-BN-ReLU-Conv3x3(k), concatenated onto the incoming state."""

    def __init__(self, in_channels: int, growth_rate: int, bottleneck_factor: int, rng, dtype=np.float32):
        super().__init__()
        self.in_channels, self.growth_rate = in_channels, growth_rate
        width = bottleneck_factor * growth_rate
        self.path = self.add_module(
            'path',
            Sequential(
                ('norm1', BatchNorm2d(in_channels, dtype)),
                ('relu1', ReLU()),
                ('conv1', Conv2d(in_channels, width, 1, rng, dtype=dtype)),
                ('norm2', BatchNorm2d(width, dtype)),
                ('relu2', ReLU()),
                ('conv2', Conv2d(width, growth_rate, 3, rng, pad=1, dtype=dtype)),
            ),
        )

    @property
    def out_channels(self) -> int:
        return self.in_channels + self.growth_rate

    def forward(self, state: np.ndarray, mode: Mode) -> np.ndarray:
        if state.ndim != 4 or state.shape[1] != self.in_channels:
            raise ConfigurationError(f'dense layer expects {self.in_channels} channels, got shape {state.shape}')
        new_features = self.path.forward(state, mode)
        out, _ = concat_channels([state, new_features])
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        d_state, d_new = split_channels(dout, [self.in_channels, self.growth_rate])
        return d_state + self.path.backward(d_new)


class DenseBlock(Module):
    def __init__(self, in_channels: int, num_layers: int, growth_rate: int, bottleneck_factor: int, rng, dtype):
        super().__init__()
        self.layers: list[DenseLayer] = []
        channels = in_channels
        for i in range(num_layers):
            layer = DenseLayer(channels, growth_rate, bottleneck_factor, rng, dtype)
            self.layers.append(self.add_module(f'layer{i + 1}', layer))
            channels = layer.out_channels
        self.out_channels = channels
        self.dtype = dtype
        self._state_shapes: list[tuple[int, ...]] = []

    def forward(self, x: np.ndarray, mode: Mode) -> list[np.ndarray]:
        """Returns the state after every layer; the last one is the block output."""
        states = []
        for layer in self.layers:
            x = layer.forward(x, mode)
            states.append(x)
        self._state_shapes = [s.shape for s in states]
        return states

    def backward(self, d_output: np.ndarray | None, state_grads: list[np.ndarray | None] | None = None) -> np.ndarray:
        """
        ``d_output`` is the gradient on the block output; ``state_grads[i]`` is an
        extra gradient on the state after layer i (None when nothing taps it).
        """
        state_grads = state_grads or []
        grad = d_output
        for i in reversed(range(len(self.layers))):
            extra = state_grads[i] if i < len(state_grads) else None
            if extra is not None:
                grad = extra if grad is None else grad + extra
            if grad is None:
                grad = np.zeros(self._state_shapes[i], dtype=self.dtype)
            grad = self.layers[i].backward(grad)
        return grad


class Transition(Module):
    def __init__(self, in_channels: int, compression: float, rng, dtype=np.float32):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = int(np.floor(compression * in_channels))
        if self.out_channels < 1:
            raise ConfigurationError(f'compression {compression} leaves no channels out of {in_channels}')
        self.path = self.add_module(
            'path',
            Sequential(
                ('norm', BatchNorm2d(in_channels, dtype)),
                ('relu', ReLU()),
                ('conv', Conv2d(in_channels, self.out_channels, 1, rng, dtype=dtype)),
                ('pool', AvgPool2d(2, 2)),
            ),
        )

    def forward(self, x: np.ndarray, mode: Mode) -> np.ndarray:
        if x.shape[2] % 2 or x.shape[3] % 2:
            raise ConfigurationError(f'transition needs even spatial dims, got {x.shape[2]}x{x.shape[3]}')
        return self.path.forward(x, mode)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return self.path.backward(dout)


@dataclass
class BackboneTapGrads:
    block3_out: np.ndarray | None = None
    block3_compressed: np.ndarray | None = None
    block4_states: list[np.ndarray | None] = field(default_factory=list)


class DenseNetBackbone(Module):
    def __init__(self, config: DenseNetConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.config = config
        in_channels = config.input_shape[0]
        self.stem = self.add_module(
            'stem',
            Sequential(
                ('conv', Conv2d(in_channels, config.stem_channels, 7, rng, stride=2, pad=3, dtype=dtype)),
                ('norm', BatchNorm2d(config.stem_channels, dtype)),
                ('relu', ReLU()),
                ('pool', AvgPool2d(2, 2)),
            ),
        )
        self.blocks: list[DenseBlock] = []
        self.transitions: list[Transition] = []
        channels = config.stem_channels
        plan = config.channel_plan()
        for index, size in enumerate(config.block_sizes):
            block = DenseBlock(channels, size, config.growth_rate, config.bottleneck_factor, rng, dtype)
            assert block.out_channels == plan.block_out[index]
            self.blocks.append(self.add_module(f'block{index + 1}', block))
            channels = block.out_channels
            if index < 3:
                transition = Transition(channels, config.compression, rng, dtype)
                self.transitions.append(self.add_module(f'transition{index + 1}', transition))
                channels = transition.out_channels
        self.out_channels = channels

    def forward(self, x: np.ndarray, mode: Mode) -> BackboneTaps:
        if x.ndim != 4 or x.shape[1] != self.config.input_shape[0]:
            raise ConfigurationError(f'backbone expects (N, {self.config.input_shape[0]}, H, W), got {x.shape}')
        x = self.stem.forward(x, mode)
        block3_out = None
        for index in range(3):
            x = self.blocks[index].forward(x, mode)[-1]
            if index == 2:
                block3_out = x
            x = self.transitions[index].forward(x, mode)
        block4_states = self.blocks[3].forward(x, mode)
        return BackboneTaps(block3_out=block3_out, block3_compressed=x, block4_states=block4_states)

    def backward(self, grads: BackboneTapGrads) -> np.ndarray:
        grad = self.blocks[3].backward(None, grads.block4_states)
        if grads.block3_compressed is not None:
            grad = grad + grads.block3_compressed
        grad = self.transitions[2].backward(grad)
        if grads.block3_out is not None:
            grad = grad + grads.block3_out
        for index in (2, 1, 0):
            grad = self.blocks[index].backward(grad)
            if index > 0:
                grad = self.transitions[index - 1].backward(grad)
        return self.stem.backward(grad)


def dense_layer_forward(state: np.ndarray, layer: DenseLayer, mode: Mode) -> np.ndarray:
    return layer.forward(state, mode)


def transition_forward(x: np.ndarray, transition: Transition, mode: Mode) -> np.ndarray:
    return transition.forward(x, mode)


def backbone_forward(image: np.ndarray, backbone: DenseNetBackbone, mode: Mode) -> BackboneTaps:
    return backbone.forward(image, mode)

import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

POOL_STAGES = ('stem pool', 'transition1', 'transition2', 'transition3')


def _stem_conv_dim(size: int) -> int:
    # 7x7 stride 2 pad 3
    return (size + 6 - 7) // 2 + 1


class DenseNetConfig(BaseModel):
    """
    DenseNet-BC backbone shape.

    Block ``b`` receives ``c_b`` channels and emits ``c_b + block_sizes[b] * growth_rate``;
    transitions compress to ``floor(compression * c)`` and halve the spatial dims.
    """

    model_config = ConfigDict(extra='forbid', frozen=True)

    growth_rate: int = Field(32, ge=1)
    block_sizes: tuple[int, int, int, int] = (6, 12, 24, 16)
    stem_channels: int = Field(64, ge=1)
    compression: float = Field(0.5, gt=0.0, le=1.0)
    bottleneck_factor: int = Field(4, ge=1)
    input_shape: tuple[int, int, int] = (3, 384, 128)

    @field_validator('block_sizes')
    @classmethod
    def _positive_blocks(cls, sizes):
        if any(s < 1 for s in sizes):
            raise ValueError(f'every dense block needs at least one layer, got {sizes}')
        return sizes

    @field_validator('input_shape')
    @classmethod
    def _positive_input(cls, shape):
        if any(s < 1 for s in shape):
            raise ValueError(f'input shape must be positive, got {shape}')
        return shape

    @model_validator(mode='after')
    def _shapes_reach_block4(self):
        _, h, w = self.input_shape
        h, w = _stem_conv_dim(h), _stem_conv_dim(w)
        for stage in POOL_STAGES:
            if h % 2 or w % 2:
                raise ValueError(f'{stage} needs even spatial dims, got {h}x{w} for input {self.input_shape}')
            h, w = h // 2, w // 2
        plan = self.channel_plan()
        if min(plan.block_in) < 1:
            raise ValueError(f'compression {self.compression} leaves a block with no input channels: {plan.block_in}')
        return self

    def channel_plan(self) -> 'ChannelPlan':
        block_in, block_out = [], []
        channels = self.stem_channels
        for index, size in enumerate(self.block_sizes):
            block_in.append(channels)
            channels += size * self.growth_rate
            block_out.append(channels)
            if index < 3:
                channels = math.floor(self.compression * channels)
        return ChannelPlan(tuple(block_in), tuple(block_out))

    def spatial_plan(self) -> tuple[tuple[int, int], ...]:
        """Feature map (H, W) inside each of the four blocks."""
        _, h, w = self.input_shape
        h, w = _stem_conv_dim(h), _stem_conv_dim(w)
        dims = []
        for index in range(4):
            h, w = h // 2, w // 2
            dims.append((h, w))
        return tuple(dims)


@dataclass(frozen=True)
class ChannelPlan:
    block_in: tuple[int, ...]
    block_out: tuple[int, ...]

    def block4_state_channels(self, growth_rate: int, layers: int) -> list[int]:
        return [self.block_in[3] + (i + 1) * growth_rate for i in range(layers)]


@dataclass
class BackboneTaps:
    """
    Intermediate feature maps exposed to the heads.

    ``block3_out`` is the block-3 output before transition 3; ``block3_compressed``
    is the transition-3 output (block-4 input). ``block4_states[i]`` is the
    concatenated state after block-4 layer i+1.
    """

    block3_out: np.ndarray
    block3_compressed: np.ndarray
    block4_states: list[np.ndarray]


def densenet121(input_shape: tuple[int, int, int] = (3, 384, 128)) -> DenseNetConfig:
    return DenseNetConfig(input_shape=input_shape)


def mini_densenet(input_shape: tuple[int, int, int] = (3, 64, 32)) -> DenseNetConfig:
    return DenseNetConfig(
        growth_rate=8,
        block_sizes=(2, 2, 4, 4),
        stem_channels=16,
        input_shape=input_shape,
    )

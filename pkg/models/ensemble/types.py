import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.densenet_backbone.types import DenseNetConfig, mini_densenet


class TapLayout(str, Enum):
    """
    Where the two head families read from.

    ``spatial``: channel splits of block 3 before transition 3, and the full
    concatenated block-4 state after each attached layer.
    ``compact``: channel splits of the transition-3 output, and only the ``k``
    channels each attached block-4 layer adds.
    """

    SPATIAL = 'spatial'
    COMPACT = 'compact'


def group_widths(channels: int, groups: int) -> list[int]:
    """Widths of ``groups`` contiguous channel groups; the last one takes the remainder."""
    base = channels // groups
    return [base] * (groups - 1) + [channels - base * (groups - 1)]


class EnsembleConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    backbone: DenseNetConfig = Field(default_factory=mini_densenet)
    learners_per_family: int = Field(4, ge=1)
    embedding_dim: int = Field(64, ge=1)
    num_classes: int = Field(20, ge=2)
    block4_attach: tuple[int, ...] | None = None
    head_init_std: float = Field(0.001, gt=0.0)
    tap_layout: TapLayout = TapLayout.SPATIAL

    @model_validator(mode='after')
    def _check_taps(self):
        plan = self.backbone.channel_plan()
        split_channels = plan.block_out[2] if self.tap_layout is TapLayout.SPATIAL else plan.block_in[3]
        if self.learners_per_family > split_channels:
            raise ValueError(
                f'cannot split {split_channels} block-3 channels into {self.learners_per_family} groups'
            )
        attach = self.attach_indices()
        n4 = self.backbone.block_sizes[3]
        if len(attach) != self.learners_per_family:
            raise ValueError(f'block4_attach needs {self.learners_per_family} entries, got {len(attach)}')
        if any(b <= a for a, b in zip(attach, attach[1:])):
            raise ValueError(f'block4_attach must be strictly increasing, got {attach}')
        if attach[0] < 1 or attach[-1] != n4:
            raise ValueError(f'block4_attach must lie in [1, {n4}] and end at {n4}, got {attach}')
        return self

    @property
    def num_heads(self) -> int:
        return 2 * self.learners_per_family

    def attach_indices(self) -> tuple[int, ...]:
        if self.block4_attach is not None:
            return tuple(self.block4_attach)
        n4, L = self.backbone.block_sizes[3], self.learners_per_family
        return tuple(math.ceil(i * n4 / L) for i in range(1, L + 1))

    def head_input_shapes(self) -> list[tuple[int, int, int]]:
        """(C, H, W) of the tap each head flattens, heads in order 0..2L-1."""
        plan = self.backbone.channel_plan()
        spatial = self.backbone.spatial_plan()
        k = self.backbone.growth_rate
        if self.tap_layout is TapLayout.SPATIAL:
            split_source, split_hw = plan.block_out[2], spatial[2]
        else:
            split_source, split_hw = plan.block_in[3], spatial[3]
        shapes = [(w, *split_hw) for w in group_widths(split_source, self.learners_per_family)]
        for index in self.attach_indices():
            channels = plan.block_in[3] + index * k if self.tap_layout is TapLayout.SPATIAL else k
            shapes.append((channels, *spatial[3]))
        return shapes

    def flatten_dims(self) -> list[int]:
        return [c * h * w for c, h, w in self.head_input_shapes()]


class BaselineConfig(BaseModel):
    """IDE comparator: pooled block-4 features, an embedding layer and one classifier."""

    model_config = ConfigDict(extra='forbid', frozen=True)

    backbone: DenseNetConfig = Field(default_factory=mini_densenet)
    embedding_dim: int = Field(64, ge=1)
    num_classes: int = Field(20, ge=2)
    dropout: float = Field(0.5, ge=0.0, lt=1.0)

    @property
    def num_heads(self) -> int:
        return 1


@dataclass
class BaseLearnerOutput:
    embedding: np.ndarray
    logits: np.ndarray


@dataclass
class EnsembleLoss:
    """
    ``per_head`` is (2L, N) cross-entropy, ``total`` the weighted per-sample sum.
    ``grad_logits[l]`` is d(mean total)/d(logits of head l).
    """

    per_head: np.ndarray
    total: np.ndarray
    grad_logits: list[np.ndarray]

    @property
    def mean_total(self) -> float:
        return float(self.total.mean())

    @property
    def mean_per_head(self) -> np.ndarray:
        return self.per_head.mean(axis=1)


@dataclass
class GradientSet:
    shared: dict[str, np.ndarray] = field(default_factory=dict)
    heads: list[dict[str, np.ndarray]] = field(default_factory=list)

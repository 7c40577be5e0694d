from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class RandomErasingConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    enabled: bool = True
    probability: float = Field(0.5, ge=0.0, le=1.0)
    area_min: float = 0.02
    area_max: float = 0.4
    aspect_min: float = 0.3
    aspect_max: float = 3.33
    max_attempts: int = Field(100, ge=1)

    @model_validator(mode='after')
    def _check_ranges(self):
        if not 0.0 < self.area_min <= self.area_max < 1.0:
            raise ValueError(
                f'erasing area range must satisfy 0 < min <= max < 1, got [{self.area_min}, {self.area_max}]'
            )
        if not 0.0 < self.aspect_min <= self.aspect_max:
            raise ValueError(f'erasing aspect range is invalid: [{self.aspect_min}, {self.aspect_max}]')
        return self


class AugmentationConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    flip: bool = True
    crop: bool = True
    crop_pad: int = Field(4, ge=0)
    random_erasing: RandomErasingConfig = Field(default_factory=RandomErasingConfig)


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    batch_size: int = Field(32, ge=1)
    lr0: float = Field(0.01, ge=0.0)
    epochs: int = Field(30, ge=1)
    decay_epoch: int = Field(24, ge=0)
    decay_factor: float = Field(0.1, gt=0.0, le=1.0)
    momentum: float = Field(0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(5e-4, ge=0.0)
    seed: int = Field(0, ge=0)
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)
    checkpoint_every: int = Field(0, ge=0)
    workers: int = Field(1, ge=1)

    @model_validator(mode='after')
    def _check_schedule(self):
        if self.decay_epoch > self.epochs:
            raise ValueError(f'decay_epoch {self.decay_epoch} is past the last epoch {self.epochs}')
        return self


@dataclass(frozen=True)
class Rect:
    top: int
    left: int
    height: int
    width: int

    @property
    def area(self) -> int:
        return self.height * self.width


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    total_loss: float
    head_losses: list[float] = field(default_factory=list)
    head_accuracies: list[float] = field(default_factory=list)


@dataclass
class TrainingResult:
    log: list[EpochRecord]
    steps: int


@dataclass
class TrainingSet:
    """Images (N, C, H, W) in [0, 1] with contiguous class labels in [0, num_classes)."""

    images: np.ndarray
    labels: np.ndarray

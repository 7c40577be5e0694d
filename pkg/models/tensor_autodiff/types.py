from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Mode(str, Enum):
    TRAIN = 'train'
    EVAL = 'eval'


@dataclass
class Parameter:
    """Trainable tensor with its gradient accumulator and SGD momentum buffer."""

    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False, repr=False)
    velocity: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.grad = np.zeros_like(self.value)
        self.velocity = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0


@dataclass
class BatchNormState:
    running_mean: np.ndarray
    running_var: np.ndarray

    @classmethod
    def fresh(cls, channels: int, dtype=np.float32) -> 'BatchNormState':
        return cls(np.zeros(channels, dtype=dtype), np.ones(channels, dtype=dtype))

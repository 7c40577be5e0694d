import numpy as np

from models.densenet_backbone.backbone import BackboneTapGrads, DenseNetBackbone
from models.tensor_autodiff.layers import BatchNorm2d, Dropout, GlobalAvgPool, Linear, Module, ReLU, Sequential
from models.tensor_autodiff.types import Mode
from models.utils.errors import ConfigurationError

from .types import BaselineConfig, BaseLearnerOutput


class BaselineModel(Module):
    """
    IDE-style single learner. Ranking uses the pooled block-4 features; the
    embedding layer only feeds the classifier during training.
    """

    kind = 'baseline'

    def __init__(self, config: BaselineConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.config = config
        self.dtype = np.dtype(dtype)
        self.backbone = self.add_module('backbone', DenseNetBackbone(config.backbone, rng, dtype))
        channels = self.backbone.out_channels
        dropout_rng = np.random.default_rng(rng.integers(2**63))
        self.pool = self.add_module(
            'pool',
            Sequential(('norm', BatchNorm2d(channels, dtype)), ('relu', ReLU()), ('gap', GlobalAvgPool())),
        )
        self.head = self.add_module(
            'head0',
            Sequential(
                ('drop1', Dropout(config.dropout, dropout_rng)),
                ('embed', Linear(channels, config.embedding_dim, rng, dtype=dtype)),
                ('drop2', Dropout(config.dropout, dropout_rng)),
                ('classifier', Linear(config.embedding_dim, config.num_classes, rng, dtype=dtype)),
            ),
        )
        self._n4 = config.backbone.block_sizes[3]

    @property
    def num_heads(self) -> int:
        return 1

    @property
    def embedding_dims(self) -> list[int]:
        return [self.backbone.out_channels]

    def forward(self, x: np.ndarray, mode: Mode) -> list[BaseLearnerOutput]:
        taps = self.backbone.forward(x, mode)
        pooled = self.pool.forward(taps.block4_states[-1], mode)
        return [BaseLearnerOutput(embedding=pooled, logits=self.head.forward(pooled, mode))]

    def backward(self, grad_logits: list[np.ndarray]) -> np.ndarray:
        if len(grad_logits) != 1:
            raise ConfigurationError(f'baseline has one head, got {len(grad_logits)} logit gradients')
        d_state = self.pool.backward(self.head.backward(grad_logits[0]))
        return self.backbone.backward(BackboneTapGrads(block4_states=[None] * (self._n4 - 1) + [d_state]))


def baseline_forward(x: np.ndarray, model: BaselineModel, mode: Mode) -> tuple[np.ndarray, np.ndarray]:
    output = model.forward(x, mode)[0]
    return output.embedding, output.logits

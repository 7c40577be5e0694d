import logging

import numpy as np

from models.densenet_backbone.backbone import BackboneTapGrads, DenseNetBackbone
from models.tensor_autodiff.functional import concat_channels, split_channels
from models.tensor_autodiff.layers import Linear, Module, Tanh
from models.tensor_autodiff.types import Mode
from models.utils.errors import ConfigurationError

from .types import BaseLearnerOutput, EnsembleConfig, TapLayout, group_widths

logger = logging.getLogger(__name__)


def split_channel_groups(feature_map: np.ndarray, groups: int) -> list[np.ndarray]:
    channels = feature_map.shape[1]
    if groups < 1 or groups > channels:
        raise ConfigurationError(f'cannot split {channels} channels into {groups} groups')
    return split_channels(feature_map, group_widths(channels, groups))


class SubNetwork(Module):
    """Flatten -> Linear(H) -> tanh -> Linear(C). No pooling: the whole tap is kept."""

    def __init__(
        self,
        tap_shape: tuple[int, int, int],
        embedding_dim: int,
        num_classes: int,
        rng: np.random.Generator,
        init_std: float,
        dtype=np.float32,
    ):
        super().__init__()
        self.tap_shape = tap_shape
        flat = int(np.prod(tap_shape))
        self.embed = self.add_module('embed', Linear(flat, embedding_dim, rng, init_std, dtype))
        self.act = Tanh()
        self.classifier = self.add_module('classifier', Linear(embedding_dim, num_classes, rng, init_std, dtype))

    def forward(self, tap: np.ndarray, mode: Mode) -> BaseLearnerOutput:
        if tap.shape[1:] != self.tap_shape:
            raise ConfigurationError(f'head expects taps of shape {self.tap_shape}, got {tap.shape[1:]}')
        embedding = self.act.forward(self.embed.forward(tap.reshape(tap.shape[0], -1), mode), mode)
        return BaseLearnerOutput(embedding=embedding, logits=self.classifier.forward(embedding, mode))

    def backward(self, d_logits: np.ndarray) -> np.ndarray:
        d_embedding = self.classifier.backward(d_logits)
        d_flat = self.embed.backward(self.act.backward(d_embedding))
        return d_flat.reshape(d_flat.shape[0], *self.tap_shape)


class EnsembleModel(Module):
    """
    Shared DenseNet backbone with 2L heads.

    Heads 0..L-1 read channel groups of the block-3 tap; heads L..2L-1 read the
    block-4 layers listed in ``config.attach_indices()``.
    """

    kind = 'ensemble'

    def __init__(self, config: EnsembleConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.config = config
        self.dtype = np.dtype(dtype)
        self.backbone = self.add_module('backbone', DenseNetBackbone(config.backbone, rng, dtype))
        self.heads: list[SubNetwork] = []
        for index, shape in enumerate(config.head_input_shapes()):
            head = SubNetwork(shape, config.embedding_dim, config.num_classes, rng, config.head_init_std, dtype)
            self.heads.append(self.add_module(f'head{index}', head))
        self.attach = config.attach_indices()
        self._state_shapes: list[tuple[int, ...]] = []
        logger.debug(f'ensemble with {len(self.heads)} heads, flatten dims {config.flatten_dims()}')

    @property
    def num_heads(self) -> int:
        return len(self.heads)

    @property
    def embedding_dims(self) -> list[int]:
        return [self.config.embedding_dim] * self.num_heads

    def head_parameter_names(self, index: int) -> list[str]:
        return [name for name, _ in self.heads[index].named_parameters(f'head{index}.')]

    def forward(self, x: np.ndarray, mode: Mode) -> list[BaseLearnerOutput]:
        L = self.config.learners_per_family
        taps = self.backbone.forward(x, mode)
        self._state_shapes = [s.shape for s in taps.block4_states]
        spatial = self.config.tap_layout is TapLayout.SPATIAL
        split_source = taps.block3_out if spatial else taps.block3_compressed
        outputs = [head.forward(tap, mode) for head, tap in zip(self.heads[:L], split_channel_groups(split_source, L))]
        k = self.config.backbone.growth_rate
        for head, index in zip(self.heads[L:], self.attach):
            state = taps.block4_states[index - 1]
            outputs.append(head.forward(state if spatial else state[:, -k:], mode))
        return outputs

    def backward(self, grad_logits: list[np.ndarray]) -> np.ndarray:
        if len(grad_logits) != self.num_heads:
            raise ConfigurationError(f'expected {self.num_heads} logit gradients, got {len(grad_logits)}')
        L = self.config.learners_per_family
        grads = BackboneTapGrads(block4_states=[None] * len(self._state_shapes))
        split_grad, _ = concat_channels([head.backward(g) for head, g in zip(self.heads[:L], grad_logits[:L])])
        if self.config.tap_layout is TapLayout.SPATIAL:
            grads.block3_out = split_grad
        else:
            grads.block3_compressed = split_grad
        k = self.config.backbone.growth_rate
        for head, index, g in zip(self.heads[L:], self.attach, grad_logits[L:]):
            d_tap = head.backward(g)
            if self.config.tap_layout is TapLayout.COMPACT:
                full = np.zeros(self._state_shapes[index - 1], dtype=d_tap.dtype)
                full[:, -k:] = d_tap
                d_tap = full
            grads.block4_states[index - 1] = d_tap
        return self.backbone.backward(grads)


def ensemble_forward(x: np.ndarray, model: EnsembleModel, mode: Mode) -> list[BaseLearnerOutput]:
    return model.forward(x, mode)

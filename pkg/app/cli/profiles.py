"""
Named experiment profiles.

``mini`` is the desk-scale setup that is actually trained. ``densenet121`` is the
full-scale DenseNet121 ensemble (2L=16, H=512) and schedule; it is meant for
FLOPs and shape analysis. ``densenet121-compact`` is the same network with the
compact tap layout, which keeps the heads at about 1% of a 2.8 GMAC forward pass.
"""

from dataclasses import dataclass

from models.densenet_backbone.types import DenseNetConfig, densenet121, mini_densenet
from models.ensemble.types import TapLayout
from models.trainer.types import TrainConfig


@dataclass(frozen=True)
class Profile:
    backbone: DenseNetConfig
    learners_per_family: int
    embedding_dim: int
    baseline_embedding_dim: int
    num_classes: int
    tap_layout: TapLayout
    train: TrainConfig


PROFILES: dict[str, Profile] = {
    'mini': Profile(
        backbone=mini_densenet(),
        learners_per_family=4,
        embedding_dim=64,
        baseline_embedding_dim=64,
        num_classes=20,
        tap_layout=TapLayout.SPATIAL,
        # 160 training images: batch 8 gives 20 steps per epoch
        train=TrainConfig(lr0=0.05, batch_size=8, epochs=30, decay_epoch=24),
    ),
    'densenet121': Profile(
        backbone=densenet121(),
        learners_per_family=8,
        embedding_dim=512,
        baseline_embedding_dim=1024,
        num_classes=751,
        tap_layout=TapLayout.SPATIAL,
        train=TrainConfig(lr0=0.05, epochs=50, decay_epoch=40),
    ),
    'densenet121-compact': Profile(
        backbone=densenet121(),
        learners_per_family=8,
        embedding_dim=512,
        baseline_embedding_dim=1024,
        num_classes=751,
        tap_layout=TapLayout.COMPACT,
        train=TrainConfig(lr0=0.05, epochs=50, decay_epoch=40),
    ),
}

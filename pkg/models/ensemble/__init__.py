from .baseline import BaselineModel, baseline_forward
from .checkpoint import build_model, load_checkpoint, save_checkpoint
from .gradcheck import model_grad_check
from .losses import backward_and_partition, ensemble_loss
from .model import EnsembleModel, SubNetwork, ensemble_forward, split_channel_groups
from .types import (
    BaselineConfig,
    BaseLearnerOutput,
    EnsembleConfig,
    EnsembleLoss,
    GradientSet,
    TapLayout,
    group_widths,
)

__all__ = [
    'BaselineConfig',
    'BaselineModel',
    'BaseLearnerOutput',
    'EnsembleConfig',
    'EnsembleLoss',
    'EnsembleModel',
    'GradientSet',
    'SubNetwork',
    'TapLayout',
    'backward_and_partition',
    'baseline_forward',
    'build_model',
    'ensemble_forward',
    'ensemble_loss',
    'group_widths',
    'load_checkpoint',
    'model_grad_check',
    'save_checkpoint',
    'split_channel_groups',
]

from .backbone import (
    BackboneTapGrads,
    DenseBlock,
    DenseLayer,
    DenseNetBackbone,
    Transition,
    backbone_forward,
    dense_layer_forward,
    transition_forward,
)
from .types import BackboneTaps, ChannelPlan, DenseNetConfig, densenet121, mini_densenet

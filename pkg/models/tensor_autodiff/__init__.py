from .functional import (
    avgpool2d,
    avgpool2d_backward,
    batchnorm,
    batchnorm_backward,
    concat_channels,
    concat_channels_backward,
    conv2d,
    conv2d_backward,
    dropout,
    dropout_backward,
    global_avg_pool,
    global_avg_pool_backward,
    linear,
    linear_backward,
    relu,
    relu_backward,
    softmax_cross_entropy,
    split_channels,
    tanh,
    tanh_backward,
)
from .gradcheck import GradCheckReport, GradTarget, LayerSpec, check_gradients, grad_check
from .layers import AvgPool2d, BatchNorm2d, Conv2d, Dropout, GlobalAvgPool, Linear, Module, ReLU, Sequential, Tanh
from .serialization import load_tensor, read_tensor, save_tensor, write_tensor
from .types import BatchNormState, Mode, Parameter

"""
Forward / backward pairs for the layers the backbone and heads are made of.

Every forward returns ``(out, cache)``; the matching backward takes the upstream
gradient and that cache. Tensors are NCHW. Backward functions return gradients
with exactly the shapes of the corresponding forward inputs.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from models.utils.errors import ConfigurationError, DataError

from .types import BatchNormState, Mode

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def _require_rank(x: np.ndarray, rank: int, what: str) -> None:
    if x.ndim != rank:
        raise ConfigurationError(f'{what} expects a rank-{rank} tensor, got shape {x.shape}')


def _conv_out_dim(size: int, kernel: int, stride: int, pad: int, axis: str) -> int:
    if stride < 1 or pad < 0:
        raise ConfigurationError(f'conv2d needs stride >= 1 and pad >= 0, got stride={stride}, pad={pad}')
    span = size + 2 * pad - kernel
    if span < 0:
        raise ConfigurationError(f'conv2d kernel {kernel} does not fit {axis} {size} with pad {pad}')
    return span // stride + 1


# ---------------------------------------------------------------- conv2d


def conv2d(x: np.ndarray, weight: np.ndarray, stride: int = 1, pad: int = 0):
    _require_rank(x, 4, 'conv2d input')
    _require_rank(weight, 4, 'conv2d weight')
    c_out, c_in, kh, kw = weight.shape
    if x.shape[1] != c_in:
        raise ConfigurationError(f'conv2d weight expects {c_in} input channels, got {x.shape[1]}')
    h_out = _conv_out_dim(x.shape[2], kh, stride, pad, 'height')
    w_out = _conv_out_dim(x.shape[3], kw, stride, pad, 'width')

    x_pad = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    windows = sliding_window_view(x_pad, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :h_out, :w_out]
    # (N, C, Ho, Wo, kh, kw) x (Cout, C, kh, kw) -> (N, Ho, Wo, Cout)
    out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    return out, (x.shape, x_pad, weight, stride, pad)


def conv2d_backward(dout: np.ndarray, cache):
    x_shape, x_pad, weight, stride, pad = cache
    _, _, kh, kw = weight.shape
    h_out, w_out = dout.shape[2:]
    windows = sliding_window_view(x_pad, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :h_out, :w_out]

    dweight = np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3]))
    # (N, Cout, Ho, Wo) x (Cout, C, kh, kw) -> (N, Ho, Wo, C, kh, kw)
    dcols = np.tensordot(dout, weight, axes=([1], [0]))

    dx_pad = np.zeros(x_pad.shape, dtype=dout.dtype)
    h_span = stride * (h_out - 1) + 1
    w_span = stride * (w_out - 1) + 1
    for i in range(kh):
        for j in range(kw):
            dx_pad[:, :, i : i + h_span : stride, j : j + w_span : stride] += dcols[..., i, j].transpose(0, 3, 1, 2)

    h, w = x_shape[2:]
    dx = np.ascontiguousarray(dx_pad[:, :, pad : pad + h, pad : pad + w])
    return dx, dweight


# ---------------------------------------------------------------- batchnorm


def batchnorm(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    state: BatchNormState,
    mode: Mode,
    eps: float = BN_EPS,
    momentum: float = BN_MOMENTUM,
):
    """
    Per-channel normalization over (N, H, W).

    Train mode normalizes with batch statistics and folds them into ``state``
    (exponential average, unbiased variance); eval mode reads ``state`` only.
    """
    _require_rank(x, 4, 'batchnorm input')
    channels = x.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise ConfigurationError(f'batchnorm affine params must have shape ({channels},)')
    axes = (0, 2, 3)
    per_channel = x.shape[0] * x.shape[2] * x.shape[3]

    if mode is Mode.TRAIN:
        if per_channel < 2:
            raise ConfigurationError('batchnorm in train mode needs at least 2 values per channel')
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        unbiased = var * (per_channel / (per_channel - 1))
        state.running_mean[...] = (1 - momentum) * state.running_mean + momentum * mean
        state.running_var[...] = (1 - momentum) * state.running_var + momentum * unbiased
    else:
        mean = state.running_mean.astype(x.dtype, copy=False)
        var = state.running_var.astype(x.dtype, copy=False)

    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * x_hat + beta[None, :, None, None]
    return out, (x_hat, gamma, inv_std, mode, per_channel)


def batchnorm_backward(dout: np.ndarray, cache):
    x_hat, gamma, inv_std, mode, per_channel = cache
    axes = (0, 2, 3)
    dbeta = dout.sum(axis=axes)
    dgamma = (dout * x_hat).sum(axis=axes)
    dx_hat = dout * gamma[None, :, None, None]

    if mode is Mode.EVAL:
        return dx_hat * inv_std[None, :, None, None], dgamma, dbeta

    sum_dx_hat = dx_hat.sum(axis=axes)[None, :, None, None]
    sum_dx_hat_x_hat = (dx_hat * x_hat).sum(axis=axes)[None, :, None, None]
    dx = (inv_std[None, :, None, None] / per_channel) * (per_channel * dx_hat - sum_dx_hat - x_hat * sum_dx_hat_x_hat)
    return dx, dgamma, dbeta


# ---------------------------------------------------------------- activations


def relu(x: np.ndarray):
    return np.maximum(x, 0), x > 0


def relu_backward(dout: np.ndarray, cache):
    return dout * cache


def tanh(x: np.ndarray):
    out = np.tanh(x)
    return out, out


def tanh_backward(dout: np.ndarray, cache):
    return dout * (1 - cache * cache)


# ---------------------------------------------------------------- linear


def linear(x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    _require_rank(x, 2, 'linear input')
    d_out, d_in = weight.shape
    if x.shape[1] != d_in:
        raise ConfigurationError(f'linear expects {d_in} input features, got {x.shape[1]}')
    if bias.shape != (d_out,):
        raise ConfigurationError(f'linear bias must have shape ({d_out},), got {bias.shape}')
    return x @ weight.T + bias, (x, weight)


def linear_backward(dout: np.ndarray, cache):
    x, weight = cache
    return dout @ weight, dout.T @ x, dout.sum(axis=0)


# ---------------------------------------------------------------- pooling


def _pool_out_dim(size: int, window: int, stride: int, axis: str) -> int:
    if window < 1 or stride < 1:
        raise ConfigurationError(f'avgpool2d needs window and stride >= 1, got {window}/{stride}')
    span = size - window
    if span < 0 or span % stride:
        raise ConfigurationError(f'avgpool2d window {window} stride {stride} does not tile {axis} {size}')
    return span // stride + 1


def avgpool2d(x: np.ndarray, window: int = 2, stride: int = 2):
    _require_rank(x, 4, 'avgpool2d input')
    _pool_out_dim(x.shape[2], window, stride, 'height')
    _pool_out_dim(x.shape[3], window, stride, 'width')
    windows = sliding_window_view(x, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.ascontiguousarray(windows.mean(axis=(4, 5)))
    return out, (x.shape, window, stride)


def avgpool2d_backward(dout: np.ndarray, cache):
    x_shape, window, stride = cache
    h_out, w_out = dout.shape[2:]
    dx = np.zeros(x_shape, dtype=dout.dtype)
    share = dout / (window * window)
    for i in range(window):
        for j in range(window):
            dx[:, :, i : i + stride * (h_out - 1) + 1 : stride, j : j + stride * (w_out - 1) + 1 : stride] += share
    return dx


def global_avg_pool(x: np.ndarray):
    _require_rank(x, 4, 'global_avg_pool input')
    return x.mean(axis=(2, 3)), x.shape


def global_avg_pool_backward(dout: np.ndarray, cache):
    n, c, h, w = cache
    return np.broadcast_to((dout / (h * w))[:, :, None, None], cache).copy()


# ---------------------------------------------------------------- dropout


def dropout(x: np.ndarray, p: float, mode: Mode, rng: np.random.Generator):
    if not 0.0 <= p < 1.0:
        raise ConfigurationError(f'dropout rate must be in [0, 1), got {p}')
    if mode is Mode.EVAL or p == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return x * mask, mask


def dropout_backward(dout: np.ndarray, cache):
    return dout if cache is None else dout * cache


# ---------------------------------------------------------------- channel concat / split


def concat_channels(inputs: list[np.ndarray]):
    if not inputs:
        raise ConfigurationError('concat_channels needs at least one input')
    for x in inputs:
        _require_rank(x, 4, 'concat_channels input')
    n, _, h, w = inputs[0].shape
    for x in inputs[1:]:
        if (x.shape[0], x.shape[2], x.shape[3]) != (n, h, w):
            raise ConfigurationError(f'concat_channels shape mismatch: {inputs[0].shape} vs {x.shape}')
    widths = [x.shape[1] for x in inputs]
    return np.concatenate(inputs, axis=1), widths


def split_channels(x: np.ndarray, widths: list[int]) -> list[np.ndarray]:
    """Slices ``x`` along channels into consecutive groups of the given widths."""
    _require_rank(x, 4, 'split_channels input')
    if sum(widths) != x.shape[1] or any(w < 1 for w in widths):
        raise ConfigurationError(f'channel widths {widths} do not partition {x.shape[1]} channels')
    bounds = np.cumsum(widths)[:-1]
    return np.split(x, bounds, axis=1)


def concat_channels_backward(dout: np.ndarray, cache) -> list[np.ndarray]:
    return split_channels(dout, cache)


# ---------------------------------------------------------------- loss


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """
    Per-sample cross-entropy of softmax(logits) against integer labels.

    Returns ``(loss, grad)`` where ``loss`` has shape (N,) and ``grad`` is the
    gradient of each sample's own loss w.r.t. its logits (softmax - one_hot).
    """
    _require_rank(logits, 2, 'softmax_cross_entropy logits')
    n, num_classes = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise DataError(f'expected {n} labels, got shape {labels.shape}')
    bad = np.flatnonzero((labels < 0) | (labels >= num_classes))
    if bad.size:
        i = int(bad[0])
        raise DataError(f'label {int(labels[i])} of sample {i} is outside [0, {num_classes})')

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1)
    rows = np.arange(n)
    loss = np.log(total) - shifted[rows, labels]
    grad = exp / total[:, None]
    grad[rows, labels] -= 1
    return loss, grad

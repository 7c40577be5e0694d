from collections.abc import Sequence

import numpy as np

from models.tensor_autodiff.functional import softmax_cross_entropy
from models.tensor_autodiff.layers import Module
from models.utils.errors import ConfigurationError

from .types import BaseLearnerOutput, EnsembleLoss, GradientSet


def ensemble_loss(
    outputs: Sequence[BaseLearnerOutput],
    labels: np.ndarray,
    head_weights: Sequence[float] | None = None,
) -> EnsembleLoss:
    """Sum over heads of per-head softmax cross-entropy; weights default to 1."""
    if not outputs:
        raise ConfigurationError('ensemble_loss needs at least one head output')
    weights = [1.0] * len(outputs) if head_weights is None else list(head_weights)
    if len(weights) != len(outputs):
        raise ConfigurationError(f'{len(weights)} head weights for {len(outputs)} heads')

    per_head, grads = [], []
    for output in outputs:
        loss, grad = softmax_cross_entropy(output.logits, labels)
        per_head.append(loss)
        grads.append(grad)
    per_head = np.stack(per_head)

    total = np.zeros_like(per_head[0])
    for weight, loss in zip(weights, per_head):
        total = total + weight * loss
    n = per_head.shape[1]
    grad_logits = [(weight / n) * grad for weight, grad in zip(weights, grads)]
    return EnsembleLoss(per_head=per_head, total=total, grad_logits=grad_logits)


def backward_and_partition(model: Module, loss: EnsembleLoss) -> GradientSet:
    """
    Runs one backward pass from ``loss`` and returns copies of the accumulated
    gradients, split into the shared backbone and each head's own parameters.
    """
    model.zero_grad()
    model.backward(loss.grad_logits)
    gradients = GradientSet()
    head_prefixes = [f'head{i}.' for i in range(model.num_heads)]
    gradients.heads = [{} for _ in head_prefixes]
    for name, param in model.named_parameters():
        for index, prefix in enumerate(head_prefixes):
            if name.startswith(prefix):
                gradients.heads[index][name] = param.grad.copy()
                break
        else:
            gradients.shared[name] = param.grad.copy()
    return gradients

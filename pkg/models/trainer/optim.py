from collections.abc import Iterable

from models.tensor_autodiff.types import Parameter


def sgd_step(params: Iterable[Parameter], lr: float, momentum: float, weight_decay: float) -> None:
    """In place: v <- momentum * v + grad + weight_decay * w; w <- w - lr * v."""
    for param in params:
        param.velocity *= momentum
        param.velocity += param.grad
        if weight_decay:
            param.velocity += weight_decay * param.value
        param.value -= lr * param.velocity

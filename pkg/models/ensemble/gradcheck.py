import numpy as np

from models.tensor_autodiff.gradcheck import GradCheckReport, GradTarget, check_gradients
from models.tensor_autodiff.types import Mode

from .losses import ensemble_loss
from .model import EnsembleModel
from .types import EnsembleConfig


def model_grad_check(
    config: EnsembleConfig,
    seed: int = 0,
    batch_size: int = 2,
    max_entries: int = 3,
    head_init_std: float | None = 0.1,
    step: float = 1e-6,
) -> GradCheckReport:
    """
    Finite-difference check of the whole ensemble (backbone, all heads, summed
    loss) in float64 and train mode, sampling ``max_entries`` coordinates per
    parameter tensor. Heads are re-initialised with head_init_std unless it is None.
    """
    if head_init_std is not None:
        config = config.model_copy(update={'head_init_std': head_init_std})
    rng = np.random.default_rng(seed)
    model = EnsembleModel(config, rng, dtype=np.float64)
    x = rng.standard_normal((batch_size, *config.backbone.input_shape))
    labels = rng.integers(0, config.num_classes, size=batch_size)
    cache = {}

    def forward(inputs):
        cache['loss'] = ensemble_loss(model.forward(inputs[0], Mode.TRAIN), labels)
        return np.asarray(cache['loss'].mean_total)

    def backward(d):
        return [model.backward([g * d for g in cache['loss'].grad_logits])]

    target = GradTarget(forward, backward, model.parameters())
    return check_gradients(target, [x], seed, step=step, max_entries=max_entries)

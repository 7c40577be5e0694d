from models.utils.errors import ConfigurationError

from .types import TrainConfig


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Step schedule: ``lr0`` before ``decay_epoch``, ``lr0 * decay_factor`` from then on."""
    if not 0 <= epoch < config.epochs:
        raise ConfigurationError(f'epoch {epoch} outside [0, {config.epochs})')
    if epoch < config.decay_epoch:
        return config.lr0
    return config.lr0 * config.decay_factor

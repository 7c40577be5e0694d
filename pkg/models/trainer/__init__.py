from .augment import augment, horizontal_flip, pad_and_crop, random_erasing
from .loop import log_header, train
from .optim import sgd_step
from .rng import epoch_rng, make_rng, sample_rng
from .schedule import lr_at
from .types import (
    AugmentationConfig,
    EpochRecord,
    RandomErasingConfig,
    Rect,
    TrainConfig,
    TrainingResult,
    TrainingSet,
)

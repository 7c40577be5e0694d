"""
Experiment configuration: ``[section]`` headers with ``key = value`` lines.

Every key is optional; unset model/backbone/train keys fall back to the chosen
profile. Unknown sections or keys are rejected.
"""

import configparser
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from models.densenet_backbone.types import DenseNetConfig
from models.ensemble.types import BaselineConfig, EnsembleConfig, TapLayout
from models.trainer.types import AugmentationConfig, RandomErasingConfig, TrainConfig
from models.utils.errors import ConfigurationError
from models.utils.validation import build_config

from .config import DATA_DIR, OUTPUT_DIR, VERSION, WORKERS
from .profiles import PROFILES


def _split_ints(value):
    if isinstance(value, str):
        value = value.strip()
        return tuple(int(v) for v in value.split(',') if v.strip()) if value else None
    return value


class Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


class DataSection(Section):
    root: str = DATA_DIR
    n_train_ids: int = Field(20, ge=1)
    n_test_ids: int = Field(10, ge=1)
    views_per_id: int = Field(8, ge=1)
    n_cams: int = Field(4, ge=2)
    height: int = Field(64, ge=8)
    width: int = Field(32, ge=8)
    seed: int = Field(0, ge=0)


class ModelSection(Section):
    kind: Literal['ensemble', 'baseline'] = 'ensemble'
    profile: Literal['mini', 'densenet121', 'densenet121-compact'] = 'mini'
    learners_per_family: int | None = Field(None, ge=1)
    embedding_dim: int | None = Field(None, ge=1)
    tap_layout: TapLayout | None = None
    head_init_std: float = Field(0.001, gt=0.0)
    block4_attach: tuple[int, ...] | None = None
    dropout: float = Field(0.5, ge=0.0, lt=1.0)

    @field_validator('block4_attach', mode='before')
    @classmethod
    def _split_attach(cls, value):
        return _split_ints(value)


class BackboneSection(Section):
    growth_rate: int | None = None
    block_sizes: tuple[int, int, int, int] | None = None
    stem_channels: int | None = None
    compression: float | None = None
    bottleneck_factor: int | None = None

    @field_validator('block_sizes', mode='before')
    @classmethod
    def _split_blocks(cls, value):
        return _split_ints(value)


class TrainSection(Section):
    batch_size: int | None = None
    lr0: float | None = None
    epochs: int | None = None
    decay_epoch: int | None = None
    decay_factor: float | None = None
    momentum: float | None = None
    weight_decay: float | None = None
    seed: int = Field(0, ge=0)
    checkpoint_every: int = Field(0, ge=0)
    workers: int = Field(WORKERS, ge=1)


class AugmentationSection(Section):
    flip: bool = True
    crop: bool = True
    crop_pad: int = Field(4, ge=0)
    random_erasing: bool = True
    erasing_probability: float = 0.5
    erasing_area_min: float = 0.02
    erasing_area_max: float = 0.4
    erasing_aspect_min: float = 0.3
    erasing_aspect_max: float = 3.33


class EvalSection(Section):
    metrics: tuple[Literal['euclidean', 'hamming'], ...] = ('euclidean', 'hamming')
    heads: str = 'all'
    max_rank: int | None = Field(None, ge=1)

    @field_validator('metrics', mode='before')
    @classmethod
    def _split_metrics(cls, value):
        if isinstance(value, str):
            return tuple(v.strip() for v in value.split(',') if v.strip())
        return value


class OutputSection(Section):
    dir: str = OUTPUT_DIR


class RunSection(Section):
    version: str = VERSION
    seed: int = 0
    command: str = ''


class ExperimentConfig(Section):
    data: DataSection = Field(default_factory=DataSection)
    model: ModelSection = Field(default_factory=ModelSection)
    backbone: BackboneSection = Field(default_factory=BackboneSection)
    train: TrainSection = Field(default_factory=TrainSection)
    augmentation: AugmentationSection = Field(default_factory=AugmentationSection)
    eval: EvalSection = Field(default_factory=EvalSection)
    output: OutputSection = Field(default_factory=OutputSection)
    run: RunSection = Field(default_factory=RunSection)

    def with_overrides(self, **sections: dict[str, Any]) -> 'ExperimentConfig':
        """Returns a copy with ``section={key: value}`` overrides applied (None values ignored)."""
        data = self.model_dump()
        for section, values in sections.items():
            data[section].update({k: v for k, v in values.items() if v is not None})
        return build_config(ExperimentConfig, data)

    def densenet_config(self) -> DenseNetConfig:
        profile = PROFILES[self.model.profile]
        overrides = self.backbone.model_dump(exclude_none=True)
        shape = profile.backbone.input_shape
        if self.model.profile == 'mini':
            shape = (3, self.data.height, self.data.width)
        return build_config(DenseNetConfig, {**profile.backbone.model_dump(), **overrides, 'input_shape': shape})

    def ensemble_config(self, num_classes: int | None = None) -> EnsembleConfig:
        profile = PROFILES[self.model.profile]
        return build_config(
            EnsembleConfig,
            backbone=self.densenet_config(),
            learners_per_family=self.model.learners_per_family or profile.learners_per_family,
            embedding_dim=self.model.embedding_dim or profile.embedding_dim,
            num_classes=num_classes or profile.num_classes,
            block4_attach=self.model.block4_attach,
            head_init_std=self.model.head_init_std,
            tap_layout=self.model.tap_layout or profile.tap_layout,
        )

    def baseline_config(self, num_classes: int | None = None) -> BaselineConfig:
        profile = PROFILES[self.model.profile]
        return build_config(
            BaselineConfig,
            backbone=self.densenet_config(),
            embedding_dim=self.model.embedding_dim or profile.baseline_embedding_dim,
            num_classes=num_classes or profile.num_classes,
            dropout=self.model.dropout,
        )

    def train_config(self) -> TrainConfig:
        profile = PROFILES[self.model.profile].train
        aug = self.augmentation
        erasing = build_config(
            RandomErasingConfig,
            enabled=aug.random_erasing,
            probability=aug.erasing_probability,
            area_min=aug.erasing_area_min,
            area_max=aug.erasing_area_max,
            aspect_min=aug.erasing_aspect_min,
            aspect_max=aug.erasing_aspect_max,
        )
        augmentation = build_config(
            AugmentationConfig, flip=aug.flip, crop=aug.crop, crop_pad=aug.crop_pad, random_erasing=erasing
        )
        overrides = self.train.model_dump(exclude_none=True)
        if 'epochs' in overrides and 'decay_epoch' not in overrides:
            # keep the profile's decay point at the same fraction of the run
            overrides['decay_epoch'] = round(overrides['epochs'] * profile.decay_epoch / profile.epochs)
        return build_config(TrainConfig, {**profile.model_dump(), **overrides, 'augmentation': augmentation})


def load_experiment_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding='utf-8') as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as e:
        raise ConfigurationError(f'{path}: cannot read experiment config ({e})') from e
    return build_config(ExperimentConfig, {name: dict(parser[name]) for name in parser.sections()})


def _format(value: Any) -> str:
    if isinstance(value, (tuple, list)):
        return ','.join(str(v) for v in value)
    if hasattr(value, 'value'):
        return str(value.value)
    return str(value)


def write_experiment_config(path: str | Path, config: ExperimentConfig, seed: int, command: str) -> None:
    """Writes the fully resolved config, with the run's seed and tool version, in the same format."""
    resolved = config.with_overrides(run={'version': VERSION, 'seed': seed, 'command': command})
    parser = configparser.ConfigParser(interpolation=None)
    for name, values in resolved.model_dump().items():
        parser[name] = {key: _format(value) for key, value in values.items() if value is not None}
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as fh:
        parser.write(fh)

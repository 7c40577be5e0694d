"""
Model checkpoints: length-prefixed UTF-8 JSON header, then every parameter in
registration order, then every batchnorm running statistic, each as a DTNS tensor.
"""

import json
import logging
from pathlib import Path

import numpy as np

from models.tensor_autodiff.layers import Module
from models.tensor_autodiff.serialization import read_tensor, write_tensor
from models.utils.binary_io import read_text, write_text
from models.utils.errors import DataError
from models.utils.validation import build_config

from .baseline import BaselineModel
from .model import EnsembleModel
from .types import BaselineConfig, EnsembleConfig

logger = logging.getLogger(__name__)

MODEL_KINDS = {
    'ensemble': (EnsembleConfig, EnsembleModel),
    'baseline': (BaselineConfig, BaselineModel),
}


def build_model(kind: str, config: EnsembleConfig | BaselineConfig | dict, seed: int, dtype=np.float32) -> Module:
    if kind not in MODEL_KINDS:
        raise DataError(f'unknown model kind {kind!r}')
    config_cls, model_cls = MODEL_KINDS[kind]
    if isinstance(config, dict):
        config = build_config(config_cls, config)
    return model_cls(config, np.random.default_rng(seed), dtype)


def save_checkpoint(path: str | Path, model: Module) -> None:
    header = {
        'kind': model.kind,
        'dtype': model.dtype.name,
        'config': model.config.model_dump(mode='json'),
    }
    with open(path, 'wb') as fh:
        write_text(fh, json.dumps(header, sort_keys=True))
        for _, param in model.named_parameters():
            write_tensor(fh, param.value)
        for _, buffer in model.named_buffers():
            write_tensor(fh, buffer)
    logger.info(f'checkpoint written to {path}')


def load_checkpoint(path: str | Path) -> Module:
    with open(path, 'rb') as fh:
        try:
            header = json.loads(read_text(fh, 'checkpoint header'))
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise DataError(f'{path}: unreadable checkpoint header') from e
        model = build_model(
            header.get('kind'), header.get('config', {}), seed=0, dtype=np.dtype(header.get('dtype', 'float32'))
        )
        targets = [(name, p.value) for name, p in model.named_parameters()] + list(model.named_buffers())
        for name, target in targets:
            tensor = read_tensor(fh)
            if tensor.shape != target.shape:
                raise DataError(f'{path}: {name} has shape {tensor.shape}, model expects {target.shape}')
            target[...] = tensor
        if fh.read(1):
            raise DataError(f'{path}: trailing bytes after the last tensor')
    return model

import logging
from collections.abc import Iterable, Sequence

import numpy as np

from models.tensor_autodiff.layers import Module
from models.tensor_autodiff.types import Mode
from models.utils.errors import ConfigurationError, DataError

from .types import FeatureMatrix

logger = logging.getLogger(__name__)


def extract_features(
    model: Module,
    images: np.ndarray,
    ids: np.ndarray,
    cams: np.ndarray,
    head_subset: Iterable[int] | None = None,
    batch_size: int = 64,
) -> FeatureMatrix:
    """
    Eval-mode embeddings of every head, concatenated in head order. With
    ``head_subset`` (0-based head indices) only those heads' columns are kept.
    """
    if batch_size < 1:
        raise ConfigurationError(f'batch size must be positive, got {batch_size}')
    if head_subset is not None:
        head_subset = list(head_subset)
        if not head_subset:
            raise ConfigurationError('head subset must not be empty')
    per_head: list[list[np.ndarray]] = [[] for _ in range(model.num_heads)]
    for start in range(0, len(images), batch_size):
        batch = np.asarray(images[start : start + batch_size], dtype=model.dtype)
        for index, output in enumerate(model.forward(batch, Mode.EVAL)):
            per_head[index].append(output.embedding)
    columns = [np.concatenate(chunks, axis=0) for chunks in per_head]
    matrix = FeatureMatrix(
        features=np.concatenate(columns, axis=1),
        ids=np.asarray(ids, dtype=np.int64),
        cams=np.asarray(cams, dtype=np.int64),
        head_dims=tuple(c.shape[1] for c in columns),
    )
    logger.debug(f'extracted {len(matrix)} x {matrix.dim} features from {model.num_heads} heads')
    return matrix if head_subset is None else matrix.select_heads(head_subset)


def combine_features(matrices: Sequence[FeatureMatrix]) -> FeatureMatrix:
    """Concatenates features of several models over the same images, in model order."""
    if not matrices:
        raise ConfigurationError('nothing to combine')
    first = matrices[0]
    for position, matrix in enumerate(matrices[1:], start=1):
        if not (np.array_equal(matrix.ids, first.ids) and np.array_equal(matrix.cams, first.cams)):
            raise DataError(f'feature matrix {position} does not list the same images as matrix 0')
    return FeatureMatrix(
        features=np.concatenate([m.features for m in matrices], axis=1),
        ids=first.ids,
        cams=first.cams,
        head_dims=tuple(d for m in matrices for d in m.head_dims),
    )

import logging

import numpy as np

from models.utils.errors import ConfigurationError

from .types import PARTITIONS, Partition, ReidDataset

logger = logging.getLogger(__name__)


def _sample_positions(src: int, dst: int) -> np.ndarray:
    # corner-aligned: output pixel i samples source coordinate i * (src - 1) / (dst - 1),
    # so the first and last pixels of both grids coincide
    if dst == 1:
        return np.zeros(1)
    return np.arange(dst) * (src - 1) / (dst - 1)


def _weights(src: int, dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pos = _sample_positions(src, dst)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, src - 1)
    return lo, hi, pos - lo


def resize(img: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Bilinear resize of a (C, H, W) image to ``target`` = (H', W')."""
    th, tw = target
    if th < 1 or tw < 1:
        raise ConfigurationError(f'resize target must be positive, got {target}')
    _, h, w = img.shape
    y0, y1, wy = _weights(h, th)
    x0, x1, wx = _weights(w, tw)
    rows = img[:, y0, :] * (1 - wy)[None, :, None] + img[:, y1, :] * wy[None, :, None]
    out = rows[:, :, x0] * (1 - wx)[None, None, :] + rows[:, :, x1] * wx[None, None, :]
    return out.astype(img.dtype, copy=False)


def resize_partition(partition: Partition, target: tuple[int, int]) -> Partition:
    images = np.stack([resize(img, target) for img in partition.images]) if len(partition) else partition.images
    return Partition(images=images, ids=partition.ids, cams=partition.cams, views=partition.views)


def resize_dataset(dataset: ReidDataset, target: tuple[int, int]) -> ReidDataset:
    """Every partition resized to ``target`` = (H', W'); ids, cams and views are kept."""
    if tuple(dataset.image_shape[1:]) == tuple(target):
        return dataset
    logger.info(f'resizing dataset images from {dataset.image_shape[1:]} to {tuple(target)}')
    return ReidDataset(*(resize_partition(getattr(dataset, name), target) for name in PARTITIONS))

import logging

import numpy as np

from .types import AugmentationConfig, RandomErasingConfig, Rect

logger = logging.getLogger(__name__)


def horizontal_flip(img: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(img[:, :, ::-1])


def pad_and_crop(img: np.ndarray, pad: int, rng: np.random.Generator) -> np.ndarray:
    """Zero-pads by ``pad`` on every side and crops a random window of the original size."""
    if pad == 0:
        return img
    _, h, w = img.shape
    padded = np.pad(img, ((0, 0), (pad, pad), (pad, pad)))
    top, left = rng.integers(0, 2 * pad + 1, size=2)
    return np.ascontiguousarray(padded[:, top : top + h, left : left + w])


def random_erasing(
    img: np.ndarray, rng: np.random.Generator, params: RandomErasingConfig
) -> tuple[np.ndarray, Rect | None]:
    """
    With probability ``params.probability`` overwrite one rectangle with uniform
    [0, 1) noise. Returns the (possibly new) image and the erased rectangle,
    or None when nothing was erased.
    """
    if not params.enabled or rng.random() >= params.probability:
        return img, None
    _, h, w = img.shape
    area = h * w
    for _ in range(params.max_attempts):
        target = rng.uniform(params.area_min, params.area_max) * area
        aspect = rng.uniform(params.aspect_min, params.aspect_max)
        rect_h = int(round(np.sqrt(target * aspect)))
        rect_w = int(round(np.sqrt(target / aspect)))
        if not (0 < rect_h < h and 0 < rect_w < w):
            continue
        # rounding can push the area outside the sampled range
        if not params.area_min * area <= rect_h * rect_w <= params.area_max * area:
            continue
        top = int(rng.integers(0, h - rect_h + 1))
        left = int(rng.integers(0, w - rect_w + 1))
        out = img.copy()
        out[:, top : top + rect_h, left : left + rect_w] = rng.uniform(0.0, 1.0, (img.shape[0], rect_h, rect_w))
        return out, Rect(top, left, rect_h, rect_w)
    logger.debug(f'random erasing found no fitting rectangle in {params.max_attempts} attempts')
    return img, None


def augment(img: np.ndarray, rng: np.random.Generator, switches: AugmentationConfig) -> np.ndarray:
    """Flip (p=0.5), pad-and-crop, then random erasing, each behind its switch."""
    if switches.flip and rng.random() < 0.5:
        img = horizontal_flip(img)
    if switches.crop:
        img = pad_and_crop(img, switches.crop_pad, rng)
    img, _ = random_erasing(img, rng, switches.random_erasing)
    return img

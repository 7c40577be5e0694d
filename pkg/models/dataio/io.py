import logging
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from models.utils.errors import DataError

from .types import PARTITIONS, Partition, ReidDataset

logger = logging.getLogger(__name__)

FILENAME_RE = re.compile(r'^(\d+)_c(\d+)_(\d+)\.ppm$')
PPM_MAGIC = b'P6'


def parse_filename(name: str) -> tuple[int, int, int]:
    """``<id>_c<cam>_<idx>.ppm`` -> (id, cam, idx)."""
    match = FILENAME_RE.match(name)
    if not match:
        raise DataError(f'malformed image file name: {name}')
    pid, cam, idx = (int(g) for g in match.groups())
    if cam < 1:
        raise DataError(f'camera ids start at 1: {name}')
    return pid, cam, idx


def write_ppm(path: Path, img: np.ndarray) -> None:
    pixels = np.round(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8).transpose(1, 2, 0)
    Image.fromarray(pixels).save(path, format='PPM')


def read_ppm(path: Path) -> np.ndarray:
    with open(path, 'rb') as fh:
        if fh.read(2) != PPM_MAGIC:
            raise DataError(f'{path}: not a binary P6 PPM file')
    try:
        with Image.open(path) as image:
            if image.mode != 'RGB':
                raise DataError(f'{path}: expected 8-bit RGB, got mode {image.mode}')
            pixels = np.asarray(image, dtype=np.uint8)
    except OSError as e:
        raise DataError(f'{path}: unreadable PPM ({e})') from e
    return (pixels.transpose(2, 0, 1) / 255.0).astype(np.float32)


def save_partition(partition: Partition, directory: Path, workers: int = 1) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / name for name in partition.file_names()]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(write_ppm, paths, partition.images))


def load_partition(directory: Path, workers: int = 1) -> Partition:
    if not directory.is_dir():
        raise DataError(f'missing partition directory {directory}')
    paths = sorted(p for p in directory.iterdir() if p.is_file())
    if not paths:
        raise DataError(f'partition directory {directory} is empty')
    meta = np.array([parse_filename(p.name) for p in paths], dtype=np.int64)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        images = list(pool.map(read_ppm, paths))
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise DataError(f'{directory}: images have differing shapes {sorted(shapes)}')
    return Partition(images=np.stack(images), ids=meta[:, 0], cams=meta[:, 1], views=meta[:, 2])


def save_dataset(dataset: ReidDataset, root: str | Path, workers: int = 1) -> None:
    root = Path(root)
    for name in PARTITIONS:
        save_partition(getattr(dataset, name), root / name, workers)
    logger.info(f'dataset written to {root}')


def load_dataset(root: str | Path, workers: int = 1) -> ReidDataset:
    root = Path(root)
    dataset = ReidDataset(*(load_partition(root / name, workers) for name in PARTITIONS))
    dataset.validate()
    return dataset

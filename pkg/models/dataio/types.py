from dataclasses import dataclass

import numpy as np

from models.trainer.types import TrainingSet
from models.utils.errors import DataError

PARTITIONS = ('train', 'query', 'gallery')


@dataclass
class Partition:
    """Images (N, 3, H, W) float32 in [0, 1]; ids >= 1 (0 marks junk); cams >= 1; view index per image."""

    images: np.ndarray
    ids: np.ndarray
    cams: np.ndarray
    views: np.ndarray

    def __post_init__(self):
        n = self.images.shape[0]
        if not (len(self.ids) == len(self.cams) == len(self.views) == n):
            raise DataError(f'partition arrays disagree: {n} images, {len(self.ids)} ids, {len(self.cams)} cams')

    def __len__(self) -> int:
        return self.images.shape[0]

    def file_names(self) -> list[str]:
        return [f'{pid:04d}_c{cam}_{view:04d}.ppm' for pid, cam, view in zip(self.ids, self.cams, self.views)]

    def pixel_features(self) -> np.ndarray:
        return self.images.reshape(len(self), -1).astype(np.float64)

    def training_set(self) -> tuple[TrainingSet, np.ndarray]:
        """Maps person ids onto contiguous labels; also returns the id for each label."""
        classes, labels = np.unique(self.ids, return_inverse=True)
        return TrainingSet(images=self.images, labels=labels.astype(np.int64)), classes


@dataclass
class ReidDataset:
    train: Partition
    query: Partition
    gallery: Partition

    def validate(self) -> None:
        train_ids = set(self.train.ids.tolist())
        test_ids = set(self.query.ids.tolist()) | set(self.gallery.ids.tolist())
        overlap = sorted((train_ids & test_ids) - {0})
        if overlap:
            raise DataError(f'train and test identities overlap: {overlap[:5]}')
        missing = sorted(set(self.query.ids.tolist()) - set(self.gallery.ids.tolist()))
        if missing:
            raise DataError(f'query ids absent from the gallery: {missing[:5]}')
        for i, (pid, cam) in enumerate(zip(self.query.ids, self.query.cams)):
            if pid == 0:
                continue
            if not np.any((self.gallery.ids == pid) & (self.gallery.cams != cam)):
                raise DataError(f'query {i} (id {pid}, cam {cam}) has no cross-camera gallery match')

    @property
    def num_train_ids(self) -> int:
        return len(np.unique(self.train.ids))

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.train.images.shape[1:])

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from models.ensemble.checkpoint import save_checkpoint
from models.ensemble.losses import backward_and_partition, ensemble_loss
from models.tensor_autodiff.layers import Module
from models.tensor_autodiff.types import Mode
from models.utils.errors import DataError

from .augment import augment
from .optim import sgd_step
from .rng import epoch_rng, sample_rng
from .schedule import lr_at
from .types import EpochRecord, TrainConfig, TrainingResult, TrainingSet

logger = logging.getLogger(__name__)


def log_header(num_heads: int) -> list[str]:
    return (
        ['epoch', 'lr', 'total_loss']
        + [f'head_{i}_loss' for i in range(num_heads)]
        + [f'head_{i}_acc' for i in range(num_heads)]
    )


def log_row(record: EpochRecord) -> list[str]:
    values = [record.lr, record.total_loss, *record.head_losses, *record.head_accuracies]
    return [str(record.epoch)] + [repr(float(v)) for v in values]


def _validate(model: Module, dataset: TrainingSet, config: TrainConfig) -> None:
    n = len(dataset.labels)
    if n == 0:
        raise DataError('training set is empty')
    if dataset.images.shape[0] != n:
        raise DataError(f'{dataset.images.shape[0]} images but {n} labels')
    if n < config.batch_size:
        raise DataError(f'{n} training samples cannot fill one batch of {config.batch_size}')
    num_classes = model.config.num_classes
    bad = np.flatnonzero((dataset.labels < 0) | (dataset.labels >= num_classes))
    if bad.size:
        raise DataError(f'label {dataset.labels[bad[0]]} of sample {bad[0]} is outside [0, {num_classes})')


def train(
    model: Module,
    dataset: TrainingSet,
    config: TrainConfig,
    log_path: str | Path | None = None,
    checkpoint_dir: str | Path | None = None,
    head_weights: list[float] | None = None,
) -> TrainingResult:
    """
    Minibatch SGD over shuffled, drop-last batches. Returns one record per epoch;
    when ``log_path`` is given the same records are streamed to CSV.
    """
    _validate(model, dataset, config)
    n, bs = len(dataset.labels), config.batch_size
    steps_per_epoch = n // bs
    params = model.parameters()
    records: list[EpochRecord] = []
    log_file = open(log_path, 'w', newline='') if log_path else None
    writer = csv.writer(log_file) if log_file else None
    if writer:
        writer.writerow(log_header(model.num_heads))
    if checkpoint_dir:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)

    def augment_one(epoch: int, index: int) -> np.ndarray:
        return augment(dataset.images[index], sample_rng(config.seed, epoch, index), config.augmentation)

    try:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for epoch in range(config.epochs):
                lr = lr_at(epoch, config)
                order = epoch_rng(config.seed, epoch).permutation(n)
                total, head_losses = 0.0, np.zeros(model.num_heads)
                correct, seen = np.zeros(model.num_heads), 0

                for step in range(steps_per_epoch):
                    batch = order[step * bs : (step + 1) * bs]
                    images = list(pool.map(lambda i: augment_one(epoch, int(i)), batch))
                    x = np.stack(images).astype(model.dtype, copy=False)
                    y = dataset.labels[batch]

                    outputs = model.forward(x, Mode.TRAIN)
                    loss = ensemble_loss(outputs, y, head_weights)
                    backward_and_partition(model, loss)
                    sgd_step(params, lr, config.momentum, config.weight_decay)

                    total += loss.mean_total
                    head_losses += loss.mean_per_head
                    correct += [np.sum(o.logits.argmax(axis=1) == y) for o in outputs]
                    seen += len(batch)

                assert seen == steps_per_epoch * bs
                record = EpochRecord(
                    epoch=epoch,
                    lr=lr,
                    total_loss=total / steps_per_epoch,
                    head_losses=(head_losses / steps_per_epoch).tolist(),
                    head_accuracies=(correct / seen).tolist(),
                )
                records.append(record)
                logger.info(
                    f'epoch {epoch + 1}/{config.epochs} lr={lr:g} loss={record.total_loss:.4f} '
                    f'mean acc={np.mean(record.head_accuracies):.3f}'
                )
                if writer:
                    writer.writerow(log_row(record))
                    log_file.flush()
                if checkpoint_dir and config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
                    save_checkpoint(Path(checkpoint_dir) / f'epoch{epoch + 1:03d}.ckpt', model)
    finally:
        if log_file:
            log_file.close()

    if checkpoint_dir:
        save_checkpoint(Path(checkpoint_dir) / 'final.ckpt', model)
    return TrainingResult(log=records, steps=steps_per_epoch * config.epochs)

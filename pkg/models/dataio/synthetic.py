"""
Seeded synthetic re-identification data.

Each identity is a fixed signature (garment colors from a small shared palette,
2-4 colored patches, a stripe texture, a body width) drawn on a standing
silhouette. Each view perturbs brightness, horizontal position, pixel noise and
applies its camera's color cast.
"""

import logging
from dataclasses import dataclass

import numpy as np

from models.utils.errors import ConfigurationError

from .types import Partition, ReidDataset

logger = logging.getLogger(__name__)

PALETTE = np.array(
    [
        [0.85, 0.15, 0.15],
        [0.15, 0.35, 0.85],
        [0.15, 0.7, 0.25],
        [0.9, 0.8, 0.2],
        [0.1, 0.1, 0.12],
        [0.92, 0.92, 0.9],
        [0.55, 0.3, 0.15],
        [0.6, 0.2, 0.7],
    ]
)

BRIGHTNESS_JITTER = 0.2
SHIFT_FRACTION = 0.1
NOISE_STD = 0.05
CAST_JITTER = 0.15


@dataclass(frozen=True)
class Patch:
    top: float
    left: float
    height: float
    width: float
    color: np.ndarray


@dataclass(frozen=True)
class IdentitySignature:
    upper: np.ndarray
    lower: np.ndarray
    skin: np.ndarray
    patches: tuple[Patch, ...]
    stripe_period: float
    stripe_vertical: bool
    stripe_color: np.ndarray
    stripe_strength: float
    build: float


def sample_signature(rng: np.random.Generator) -> IdentitySignature:
    upper, lower, stripe = PALETTE[rng.choice(len(PALETTE), size=3, replace=False)]
    patches = tuple(
        Patch(
            top=rng.uniform(0.25, 0.8),
            left=rng.uniform(-0.2, 0.1),
            height=rng.uniform(0.06, 0.18),
            width=rng.uniform(0.08, 0.22),
            color=PALETTE[rng.integers(len(PALETTE))],
        )
        for _ in range(rng.integers(2, 5))
    )
    return IdentitySignature(
        upper=upper,
        lower=lower,
        skin=np.array([0.85, 0.65, 0.5]) * rng.uniform(0.6, 1.1),
        patches=patches,
        stripe_period=rng.uniform(3.0, 8.0),
        stripe_vertical=bool(rng.random() < 0.5),
        stripe_color=stripe,
        stripe_strength=rng.uniform(0.3, 0.8),
        build=rng.uniform(0.85, 1.15),
    )


def render(signature: IdentitySignature, dims: tuple[int, int], center: float, background: float) -> np.ndarray:
    """Draws one person into a (3, H, W) float64 canvas; ``center`` is the relative x of the body axis."""
    h, w = dims
    yy, xx = np.meshgrid((np.arange(h) + 0.5) / h, (np.arange(w) + 0.5) / w, indexing='ij')
    dx = (xx - center) / signature.build
    canvas = np.full((3, h, w), background)

    def paint(mask: np.ndarray, color: np.ndarray) -> None:
        canvas[:, mask] = color[:, None]

    torso = (yy >= 0.22) & (yy < 0.58) & (np.abs(dx) <= 0.22)
    arms = (yy >= 0.24) & (yy < 0.55) & (np.abs(dx) > 0.22) & (np.abs(dx) <= 0.3)
    legs = (yy >= 0.58) & (yy < 0.95) & (np.abs(dx) >= 0.03) & (np.abs(dx) <= 0.18)
    head = ((yy - 0.12) / 0.08) ** 2 + (dx / 0.12) ** 2 <= 1.0

    paint(head, signature.skin)
    paint(arms, signature.upper * 0.8)
    paint(legs, signature.lower)
    paint(torso, signature.upper)

    coord = xx * w if signature.stripe_vertical else yy * h
    stripes = torso & (np.sin(2 * np.pi * coord / signature.stripe_period) > 0)
    canvas[:, stripes] = (1 - signature.stripe_strength) * canvas[:, stripes] + (
        signature.stripe_strength * signature.stripe_color[:, None]
    )

    body = torso | legs
    for patch in signature.patches:
        region = (
            body
            & (yy >= patch.top)
            & (yy < patch.top + patch.height)
            & (dx >= patch.left)
            & (dx < patch.left + patch.width)
        )
        paint(region, patch.color)
    return canvas


def render_view(
    signature: IdentitySignature,
    cast: np.ndarray,
    dims: tuple[int, int],
    rng: np.random.Generator,
) -> np.ndarray:
    brightness = rng.uniform(1 - BRIGHTNESS_JITTER, 1 + BRIGHTNESS_JITTER)
    shift = rng.uniform(-SHIFT_FRACTION, SHIFT_FRACTION)
    background = rng.uniform(0.3, 0.7)
    img = render(signature, dims, 0.5 + shift, background)
    img = img * brightness * cast[:, None, None]
    img = img + rng.normal(0.0, NOISE_STD, img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def _check_feasible(n_train_ids: int, n_test_ids: int, views_per_id: int, n_cams: int, dims) -> None:
    if n_cams < 2:
        raise ConfigurationError(f'need at least 2 cameras, got {n_cams}')
    if views_per_id < n_cams + 2:
        raise ConfigurationError(
            f'{views_per_id} views per id cannot give every one of {n_cams} query cameras '
            f'a cross-camera gallery match (need at least {n_cams + 2})'
        )
    if n_train_ids < 1 or n_test_ids < 1:
        raise ConfigurationError(f'need train and test identities, got {n_train_ids}/{n_test_ids}')
    if dims[0] < 8 or dims[1] < 8:
        raise ConfigurationError(f'image dims {dims} are too small to draw a person')


def _assemble(images: list, ids: list, cams: list, views: list, dims) -> Partition:
    order = sorted(range(len(ids)), key=lambda i: (ids[i], cams[i], views[i]))
    stack = np.stack([images[i] for i in order]) if order else np.zeros((0, 3, *dims), dtype=np.float32)
    ids, cams, views = (np.array([values[i] for i in order], dtype=np.int64) for values in (ids, cams, views))
    return Partition(images=stack, ids=ids, cams=cams, views=views)


def generate_synthetic(
    n_train_ids: int = 20,
    n_test_ids: int = 10,
    views_per_id: int = 8,
    n_cams: int = 4,
    dims: tuple[int, int] = (64, 32),
    seed: int = 0,
) -> ReidDataset:
    """
    Train ids are 1..n_train_ids, test ids follow. View v of an identity is seen
    by camera ``v % n_cams + 1``; the first view per camera of a test id goes to
    the query set, the rest to the gallery.
    """
    _check_feasible(n_train_ids, n_test_ids, views_per_id, n_cams, dims)
    casts = np.random.default_rng([seed, 2]).uniform(1 - CAST_JITTER, 1 + CAST_JITTER, (n_cams, 3))

    buckets = {name: ([], [], [], []) for name in ('train', 'query', 'gallery')}
    for pid in range(1, n_train_ids + n_test_ids + 1):
        signature = sample_signature(np.random.default_rng([seed, 0, pid]))
        for view in range(views_per_id):
            cam = view % n_cams + 1
            img = render_view(signature, casts[cam - 1], dims, np.random.default_rng([seed, 1, pid, view]))
            if pid <= n_train_ids:
                name = 'train'
            else:
                name = 'query' if view < n_cams else 'gallery'
            for bucket, value in zip(buckets[name], (img, pid, cam, view)):
                bucket.append(value)

    dataset = ReidDataset(*(_assemble(*buckets[name], dims) for name in ('train', 'query', 'gallery')))
    dataset.validate()
    logger.info(
        f'synthetic dataset: {len(dataset.train)} train / {len(dataset.query)} query / '
        f'{len(dataset.gallery)} gallery images at {dims[0]}x{dims[1]}'
    )
    return dataset

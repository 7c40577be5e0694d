from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from models.utils.errors import ConfigurationError, DataError


class Metric(str, Enum):
    EUCLIDEAN = 'euclidean'
    HAMMING = 'hamming'


def _check_labels(n: int, ids: np.ndarray, cams: np.ndarray) -> None:
    if len(ids) != n or len(cams) != n:
        raise DataError(f'{n} rows but {len(ids)} ids and {len(cams)} cams')


@dataclass
class FeatureMatrix:
    """Row-per-image embeddings; ``head_dims`` records the width of each concatenated head, in order."""

    features: np.ndarray
    ids: np.ndarray
    cams: np.ndarray
    head_dims: tuple[int, ...] = ()

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DataError(f'features must be a matrix, got shape {self.features.shape}')
        _check_labels(self.features.shape[0], self.ids, self.cams)
        if not self.head_dims:
            self.head_dims = (self.dim,)
        if sum(self.head_dims) != self.dim:
            raise DataError(f'head widths {self.head_dims} do not add up to dim {self.dim}')

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_heads(self) -> int:
        return len(self.head_dims)

    def select_heads(self, heads) -> 'FeatureMatrix':
        """Column slices of the given heads (0-based), concatenated in ascending head order."""
        heads = sorted(set(int(h) for h in heads))
        if not heads:
            raise ConfigurationError('head subset must not be empty')
        if heads[0] < 0 or heads[-1] >= self.num_heads:
            raise ConfigurationError(f'head subset {heads} outside [0, {self.num_heads})')
        offsets = np.concatenate([[0], np.cumsum(self.head_dims)])
        columns = [self.features[:, offsets[h] : offsets[h + 1]] for h in heads]
        return FeatureMatrix(
            features=np.concatenate(columns, axis=1),
            ids=self.ids,
            cams=self.cams,
            head_dims=tuple(self.head_dims[h] for h in heads),
        )


@dataclass
class BinaryCodeMatrix:
    """Bit ``b`` of row ``i`` lives in ``words[i, b // 64]`` at bit position ``b % 64``."""

    words: np.ndarray
    dim: int
    ids: np.ndarray
    cams: np.ndarray

    def __post_init__(self):
        _check_labels(self.words.shape[0], self.ids, self.cams)
        if self.words.dtype != np.uint64 or self.words.shape[1] != (self.dim + 63) // 64:
            raise DataError(f'{self.dim} bits need {(self.dim + 63) // 64} uint64 words, got {self.words.shape}')

    def __len__(self) -> int:
        return self.words.shape[0]


@dataclass
class QueryRanking:
    query_index: int
    order: np.ndarray
    distances: np.ndarray
    relevant: np.ndarray

    @property
    def num_relevant(self) -> int:
        return int(self.relevant.sum())


@dataclass
class RankingResult:
    """Per scored query the kept gallery indices by ascending distance; skipped query indices separately."""

    metric: Metric
    queries: list[QueryRanking] = field(default_factory=list)
    skipped: list[int] = field(default_factory=list)


@dataclass
class CmcCurve:
    match_rates: np.ndarray
    mean_ap: float

    def rank(self, r: int) -> float:
        """Match rate at 1-based rank ``r`` (saturates past the curve's end)."""
        return float(self.match_rates[min(r, len(self.match_rates)) - 1])


@dataclass
class EvaluationReport:
    metric: Metric
    cmc: CmcCurve
    scored: int
    skipped: list[int]

    @property
    def rank1(self) -> float:
        return self.cmc.rank(1)

    @property
    def rank5(self) -> float:
        return self.cmc.rank(5)

    @property
    def rank10(self) -> float:
        return self.cmc.rank(10)

    @property
    def mean_ap(self) -> float:
        return self.cmc.mean_ap


@dataclass
class SubsetScore:
    kind: str
    heads: tuple[int, ...]
    metric: Metric
    rank1: float
    rank5: float
    rank10: float
    mean_ap: float


@dataclass
class HeadReport:
    """Single-head, average-single, cumulative (heads 0..k-1) and full-ensemble scores."""

    rows: list[SubsetScore] = field(default_factory=list)

    def select(self, kind: str, metric: Metric) -> list[SubsetScore]:
        return [row for row in self.rows if row.kind == kind and row.metric is metric]

    def full(self, metric: Metric) -> SubsetScore:
        return self.select('full', metric)[0]

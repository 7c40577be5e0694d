import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from models.utils.errors import ConfigurationError

from .codes import quantize, unpack_bits
from .distances import euclidean_dist, hamming_dist
from .types import BinaryCodeMatrix, FeatureMatrix, Metric, QueryRanking, RankingResult

logger = logging.getLogger(__name__)

JUNK_ID = 0


def _as_metric_space(matrix: FeatureMatrix | BinaryCodeMatrix, metric: Metric) -> np.ndarray:
    if metric is Metric.HAMMING:
        codes = matrix if isinstance(matrix, BinaryCodeMatrix) else quantize(matrix)
        return codes.words
    if isinstance(matrix, BinaryCodeMatrix):
        return unpack_bits(matrix).astype(np.float64)
    return matrix.features.astype(np.float64, copy=False)


def evaluation_mask(query_id: int, query_cam: int, gallery_ids: np.ndarray, gallery_cams: np.ndarray):
    """
    ``keep``: gallery entries that take part in the ranking (drops same id + same cam, and junk).
    ``relevant``: kept entries with the query's id.
    """
    keep = ~((gallery_ids == query_id) & (gallery_cams == query_cam)) & (gallery_ids != JUNK_ID)
    relevant = keep & (gallery_ids == query_id) & (query_id != JUNK_ID)
    return keep, relevant


def rank_gallery(
    query: FeatureMatrix | BinaryCodeMatrix,
    gallery: FeatureMatrix | BinaryCodeMatrix,
    metric: Metric | str,
    workers: int = 1,
) -> RankingResult:
    """Ranks the gallery for every query; queries without a relevant gallery item are skipped."""
    metric = Metric(metric)
    if query.dim != gallery.dim:
        raise ConfigurationError(f'query dim {query.dim} != gallery dim {gallery.dim}')
    q_space = _as_metric_space(query, metric)
    g_space = _as_metric_space(gallery, metric)
    distance = hamming_dist if metric is Metric.HAMMING else euclidean_dist

    def rank_one(i: int) -> QueryRanking | None:
        keep, relevant = evaluation_mask(query.ids[i], query.cams[i], gallery.ids, gallery.cams)
        if not relevant.any():
            return None
        kept = np.flatnonzero(keep)
        dist = distance(q_space[i], g_space[kept])
        by_distance = np.argsort(dist, kind='stable')
        order = kept[by_distance]
        return QueryRanking(query_index=i, order=order, distances=dist[by_distance], relevant=relevant[order])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        rankings = list(pool.map(rank_one, range(len(query))))

    result = RankingResult(metric=metric)
    for i, ranking in enumerate(rankings):
        if ranking is None:
            result.skipped.append(i)
        else:
            result.queries.append(ranking)
    if result.skipped:
        logger.warning(f'{len(result.skipped)} queries have no relevant gallery item and were skipped')
    return result

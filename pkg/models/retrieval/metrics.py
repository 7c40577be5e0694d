import numpy as np

from models.utils.errors import DataError

from .ranking import rank_gallery
from .types import BinaryCodeMatrix, CmcCurve, EvaluationReport, FeatureMatrix, Metric, RankingResult


def average_precision(relevant_in_order: np.ndarray) -> float:
    """Mean of precision@k over the ranks k that hold a relevant item."""
    relevant_in_order = np.asarray(relevant_in_order, dtype=bool)
    hits = np.flatnonzero(relevant_in_order)
    if hits.size == 0:
        return 0.0
    precision_at_hits = np.arange(1, hits.size + 1) / (hits + 1)
    return float(precision_at_hits.mean())


def mean_ap(result: RankingResult) -> float:
    if not result.queries:
        raise DataError('no scored queries: every query lacks a relevant gallery item')
    return float(np.mean([average_precision(q.relevant) for q in result.queries]))


def cmc(result: RankingResult, max_rank: int | None = None) -> CmcCurve:
    """Fraction of scored queries whose first relevant hit is within each rank 1..max_rank."""
    if not result.queries:
        raise DataError('no scored queries: every query lacks a relevant gallery item')
    if max_rank is None:
        max_rank = max(len(q.order) for q in result.queries)
    first_hits = np.array([np.flatnonzero(q.relevant)[0] for q in result.queries])
    rates = np.array([(first_hits < r).mean() for r in range(1, max_rank + 1)])
    return CmcCurve(match_rates=rates, mean_ap=mean_ap(result))


def evaluate(
    query: FeatureMatrix | BinaryCodeMatrix,
    gallery: FeatureMatrix | BinaryCodeMatrix,
    metric: Metric | str,
    max_rank: int | None = None,
    workers: int = 1,
) -> EvaluationReport:
    result = rank_gallery(query, gallery, metric, workers)
    return EvaluationReport(
        metric=Metric(metric),
        cmc=cmc(result, max_rank),
        scored=len(result.queries),
        skipped=result.skipped,
    )

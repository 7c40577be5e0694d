import logging

import numpy as np

from .metrics import evaluate
from .types import FeatureMatrix, HeadReport, Metric, SubsetScore

logger = logging.getLogger(__name__)


def _score(kind: str, heads: tuple[int, ...], query: FeatureMatrix, gallery: FeatureMatrix, metric, workers):
    report = evaluate(query.select_heads(heads), gallery.select_heads(heads), metric, workers=workers)
    return SubsetScore(kind, heads, metric, report.rank1, report.rank5, report.rank10, report.mean_ap)


def head_report(
    query: FeatureMatrix,
    gallery: FeatureMatrix,
    metrics: tuple[Metric, ...] = (Metric.EUCLIDEAN, Metric.HAMMING),
    workers: int = 1,
) -> HeadReport:
    """
    Scores every single head, their average ("average base learner"), every
    cumulative prefix of heads and the full ensemble, under each metric.
    """
    report = HeadReport()
    n = query.num_heads
    everything = tuple(range(n))
    for metric in metrics:
        singles = [_score('single', (h,), query, gallery, metric, workers) for h in range(n)]
        report.rows += singles
        report.rows.append(
            SubsetScore(
                'average',
                everything,
                metric,
                *(float(np.mean([getattr(s, f) for s in singles])) for f in ('rank1', 'rank5', 'rank10', 'mean_ap')),
            )
        )
        report.rows += [_score('cumulative', tuple(range(k)), query, gallery, metric, workers) for k in range(1, n + 1)]
        report.rows.append(_score('full', everything, query, gallery, metric, workers))
        full = report.full(metric)
        logger.info(f'{metric.value}: full ensemble rank-1 {full.rank1:.3f} mAP {full.mean_ap:.3f}')
    return report

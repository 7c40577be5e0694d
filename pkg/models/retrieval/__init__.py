from .codes import bit_count64, pack_bits, quantize, unpack_bits
from .distances import euclidean_dist, hamming_dist
from .features import combine_features, extract_features
from .io import load_features, save_features, write_cmc_csv, write_ranking_csv
from .metrics import average_precision, cmc, evaluate, mean_ap
from .ranking import evaluation_mask, rank_gallery
from .report import head_report
from .types import (
    BinaryCodeMatrix,
    CmcCurve,
    EvaluationReport,
    FeatureMatrix,
    HeadReport,
    Metric,
    QueryRanking,
    RankingResult,
    SubsetScore,
)

__all__ = [
    'BinaryCodeMatrix',
    'CmcCurve',
    'EvaluationReport',
    'FeatureMatrix',
    'HeadReport',
    'Metric',
    'QueryRanking',
    'RankingResult',
    'SubsetScore',
    'average_precision',
    'bit_count64',
    'cmc',
    'combine_features',
    'euclidean_dist',
    'evaluate',
    'evaluation_mask',
    'extract_features',
    'hamming_dist',
    'head_report',
    'load_features',
    'mean_ap',
    'pack_bits',
    'quantize',
    'rank_gallery',
    'save_features',
    'unpack_bits',
    'write_cmc_csv',
    'write_ranking_csv',
]

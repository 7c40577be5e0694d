"""
Feature files: ``FEAT`` magic, u32 rows, u32 dim, u8 kind (0 = float32,
1 = packed bits), rows x u32 ids, rows x u16 cams, then the data block
(rows x dim float32, or rows x ceil(dim/64) uint64 words). Little-endian.
"""

import csv
from pathlib import Path

import numpy as np

from models.utils.binary_io import expect_magic, read_exact, read_u8, read_u32, write_magic, write_u8, write_u32
from models.utils.errors import DataError

from .types import BinaryCodeMatrix, EvaluationReport, FeatureMatrix, RankingResult

FEATURE_MAGIC = b'FEAT'
KIND_FLOAT = 0
KIND_BITS = 1


def save_features(path: str | Path, matrix: FeatureMatrix | BinaryCodeMatrix) -> None:
    if isinstance(matrix, BinaryCodeMatrix):
        kind, data = KIND_BITS, matrix.words.astype('<u8')
    else:
        kind, data = KIND_FLOAT, matrix.features.astype('<f4')
    if np.any(matrix.ids < 0) or np.any(matrix.ids > 0xFFFFFFFF):
        raise DataError(f'ids must fit u32, got range [{matrix.ids.min()}, {matrix.ids.max()}]')
    if np.any(matrix.cams < 0) or np.any(matrix.cams > 0xFFFF):
        raise DataError(f'cams must fit u16, got range [{matrix.cams.min()}, {matrix.cams.max()}]')
    with open(path, 'wb') as fh:
        write_magic(fh, FEATURE_MAGIC)
        write_u32(fh, len(matrix))
        write_u32(fh, matrix.dim)
        write_u8(fh, kind)
        fh.write(np.asarray(matrix.ids, dtype='<u4').tobytes())
        fh.write(np.asarray(matrix.cams, dtype='<u2').tobytes())
        fh.write(np.ascontiguousarray(data).tobytes())


def load_features(path: str | Path, head_dims: tuple[int, ...] = ()) -> FeatureMatrix | BinaryCodeMatrix:
    with open(path, 'rb') as fh:
        expect_magic(fh, FEATURE_MAGIC, 'feature file')
        rows = read_u32(fh, 'feature rows')
        dim = read_u32(fh, 'feature dim')
        kind = read_u8(fh, 'feature kind')
        ids = np.frombuffer(read_exact(fh, 4 * rows, 'feature ids'), dtype='<u4').astype(np.int64)
        cams = np.frombuffer(read_exact(fh, 2 * rows, 'feature cams'), dtype='<u2').astype(np.int64)
        if kind == KIND_FLOAT:
            payload = read_exact(fh, 4 * rows * dim, 'feature data')
            data = np.frombuffer(payload, dtype='<f4').astype(np.float32).reshape(rows, dim)
            result = FeatureMatrix(data, ids, cams, tuple(head_dims))
        elif kind == KIND_BITS:
            words = (dim + 63) // 64
            payload = read_exact(fh, 8 * rows * words, 'feature codes')
            data = np.frombuffer(payload, dtype='<u8').astype(np.uint64).reshape(rows, words)
            result = BinaryCodeMatrix(data, dim, ids, cams)
        else:
            raise DataError(f'{path}: unknown feature kind {kind}')
        if fh.read(1):
            raise DataError(f'{path}: trailing bytes after feature data')
    return result


def write_cmc_csv(path: str | Path, report: EvaluationReport) -> None:
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['rank', 'match_rate'])
        for rank, rate in enumerate(report.cmc.match_rates, start=1):
            writer.writerow([rank, repr(float(rate))])
        writer.writerow(['mAP', repr(report.mean_ap)])


def write_ranking_csv(path: str | Path, result: RankingResult, top: int | None = None) -> None:
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['query_index', 'rank', 'gallery_index', 'distance', 'relevant'])
        for ranking in result.queries:
            limit = len(ranking.order) if top is None else min(top, len(ranking.order))
            for rank in range(limit):
                writer.writerow(
                    [
                        ranking.query_index,
                        rank + 1,
                        int(ranking.order[rank]),
                        repr(float(ranking.distances[rank])),
                        int(ranking.relevant[rank]),
                    ]
                )

import numpy as np

from models.utils.errors import ConfigurationError

from .codes import bit_count64


def euclidean_dist(q_row: np.ndarray, g_rows: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance from one query row to every gallery row."""
    if g_rows.ndim != 2 or q_row.shape != (g_rows.shape[1],):
        raise ConfigurationError(f'query dim {q_row.shape} does not match gallery {g_rows.shape}')
    diff = g_rows - q_row
    return (diff * diff).sum(axis=1)


def hamming_dist(q_code: np.ndarray, g_codes: np.ndarray) -> np.ndarray:
    """Popcount of XOR over packed uint64 words."""
    if g_codes.ndim != 2 or q_code.shape != (g_codes.shape[1],):
        raise ConfigurationError(f'query code {q_code.shape} does not match gallery codes {g_codes.shape}')
    return bit_count64(np.bitwise_xor(g_codes, q_code)).sum(axis=1).astype(np.int64)

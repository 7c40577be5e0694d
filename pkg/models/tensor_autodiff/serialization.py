"""
Tensor codec: ``DTNS`` magic, u32 rank, u32 extents, u8 dtype flag, raw data.

All integers and payloads are little-endian; the dtype flag is 0 for float32
and 1 for float64.
"""

from pathlib import Path
from typing import BinaryIO

import numpy as np

from models.utils.binary_io import expect_magic, read_exact, read_u8, read_u32, write_magic, write_u8, write_u32
from models.utils.errors import ConfigurationError, DataError

TENSOR_MAGIC = b'DTNS'
DTYPE_FLAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
FLAG_DTYPES = {flag: dtype.newbyteorder('<') for dtype, flag in DTYPE_FLAGS.items()}


def write_tensor(fh: BinaryIO, tensor: np.ndarray) -> None:
    dtype = np.dtype(tensor.dtype).newbyteorder('=')
    if dtype not in DTYPE_FLAGS:
        raise ConfigurationError(f'tensor codec supports float32/float64, got {tensor.dtype}')
    write_magic(fh, TENSOR_MAGIC)
    write_u32(fh, tensor.ndim)
    for extent in tensor.shape:
        write_u32(fh, extent)
    write_u8(fh, DTYPE_FLAGS[dtype])
    fh.write(np.ascontiguousarray(tensor, dtype=FLAG_DTYPES[DTYPE_FLAGS[dtype]]).tobytes())


def read_tensor(fh: BinaryIO) -> np.ndarray:
    expect_magic(fh, TENSOR_MAGIC, 'tensor')
    rank = read_u32(fh, 'tensor rank')
    shape = tuple(read_u32(fh, 'tensor extent') for _ in range(rank))
    flag = read_u8(fh, 'tensor dtype flag')
    if flag not in FLAG_DTYPES:
        raise DataError(f'unknown tensor dtype flag {flag}')
    dtype = FLAG_DTYPES[flag]
    count = int(np.prod(shape, dtype=np.int64))
    payload = read_exact(fh, count * dtype.itemsize, 'tensor data')
    return np.frombuffer(payload, dtype=dtype).astype(dtype.newbyteorder('=')).reshape(shape)


def save_tensor(path: str | Path, tensor: np.ndarray) -> None:
    with open(path, 'wb') as fh:
        write_tensor(fh, tensor)


def load_tensor(path: str | Path) -> np.ndarray:
    with open(path, 'rb') as fh:
        return read_tensor(fh)

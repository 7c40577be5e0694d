import numpy as np

from .types import BinaryCodeMatrix, FeatureMatrix

M1 = np.uint64(0x5555555555555555)
M2 = np.uint64(0x3333333333333333)
M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
H01 = np.uint64(0x0101010101010101)


def bit_count64(arr: np.ndarray) -> np.ndarray:
    """SWAR popcount of every uint64 element."""
    arr = arr - ((arr >> np.uint64(1)) & M1)
    arr = (arr & M2) + ((arr >> np.uint64(2)) & M2)
    arr = (arr + (arr >> np.uint64(4))) & M4
    return (arr * H01) >> np.uint64(56)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """(n, dim) {0,1} -> (n, ceil(dim/64)) uint64, least significant bit first, zero padded."""
    n, dim = bits.shape
    words = (dim + 63) // 64
    packed = np.packbits(bits.astype(np.uint8), axis=1, bitorder='little')
    padded = np.zeros((n, words * 8), dtype=np.uint8)
    padded[:, : packed.shape[1]] = packed
    return padded.view('<u8').astype(np.uint64)


def unpack_bits(codes: BinaryCodeMatrix) -> np.ndarray:
    as_bytes = codes.words.astype('<u8').view(np.uint8)
    return np.unpackbits(as_bytes, axis=1, bitorder='little')[:, : codes.dim]


def quantize(features: FeatureMatrix) -> BinaryCodeMatrix:
    """bit = 1 iff the feature is >= 0."""
    return BinaryCodeMatrix(
        words=pack_bits(features.features >= 0),
        dim=features.dim,
        ids=features.ids,
        cams=features.cams,
    )

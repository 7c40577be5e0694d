import struct
from typing import BinaryIO

from .errors import DataError


def write_magic(fh: BinaryIO, magic: bytes) -> None:
    fh.write(magic)


def read_exact(fh: BinaryIO, size: int, what: str) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise DataError(f'Truncated {what}: expected {size} bytes, got {len(data)}')
    return data


def expect_magic(fh: BinaryIO, magic: bytes, what: str) -> None:
    found = read_exact(fh, len(magic), f'{what} header')
    if found != magic:
        raise DataError(f'Bad {what} magic: expected {magic!r}, got {found!r}')


def write_u8(fh: BinaryIO, value: int) -> None:
    fh.write(struct.pack('<B', value))


def read_u8(fh: BinaryIO, what: str) -> int:
    return struct.unpack('<B', read_exact(fh, 1, what))[0]


def write_u32(fh: BinaryIO, value: int) -> None:
    fh.write(struct.pack('<I', value))


def read_u32(fh: BinaryIO, what: str) -> int:
    return struct.unpack('<I', read_exact(fh, 4, what))[0]


def write_text(fh: BinaryIO, text: str) -> None:
    payload = text.encode('utf-8')
    write_u32(fh, len(payload))
    fh.write(payload)


def read_text(fh: BinaryIO, what: str) -> str:
    size = read_u32(fh, f'{what} length')
    return read_exact(fh, size, what).decode('utf-8')

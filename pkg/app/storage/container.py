"""
Бинарный контейнер тензоров PGGT

Layout (little-endian): magic "PGGT", version u32, entry count u32, then per
entry: name length u16, UTF-8 name, dtype code u8, rank u8, rank × u32 dims
and the row-major payload.
"""
import logging
import struct
from typing import Dict, Mapping, Optional

import numpy as np

from ..config.settings import settings
from ..core.errors import FormatError, InvalidInputError
from .files import atomic_write

logger = logging.getLogger(__name__)

MAGIC = b'PGGT'
HEADER_SIZE = 12

# код dtype → numpy dtype
DTYPES = {0: np.dtype('<f4'), 1: np.dtype('u1')}
DTYPE_CODES = {np.dtype('<f4'): 0, np.dtype('u1'): 1}


def _dtype_code(name: str, array: np.ndarray) -> int:
    dtype = array.dtype.newbyteorder('<') if array.dtype.kind == 'f' else array.dtype
    if dtype not in DTYPE_CODES:
        raise InvalidInputError(f"tensor '{name}' has dtype {array.dtype}; only float32 and uint8 are stored")
    return DTYPE_CODES[dtype]


def encode_container(tensors: Mapping[str, np.ndarray], version: int = settings.CONTAINER_VERSION) -> bytes:
    """Serializes tensors in mapping order"""
    parts = [MAGIC, struct.pack('<II', version, len(tensors))]
    for name, array in tensors.items():
        array = np.asarray(array)
        code = _dtype_code(name, array)
        raw_name = name.encode('utf-8')
        if len(raw_name) > 0xFFFF:
            raise InvalidInputError(f"tensor name too long: {len(raw_name)} bytes")
        if array.ndim > 0xFF:
            raise InvalidInputError(f"tensor '{name}' has rank {array.ndim}")
        parts.append(struct.pack('<H', len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack('<BB', code, array.ndim))
        parts.append(struct.pack(f'<{array.ndim}I', *array.shape))
        parts.append(np.ascontiguousarray(array, dtype=DTYPES[code]).tobytes())
    return b''.join(parts)


class _Reader:
    """Курсор по буферу с проверкой длины"""

    def __init__(self, data: bytes, path: Optional[str]):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise FormatError(f"truncated {what}: need {size} bytes, {len(self.data) - self.offset} left",
                              self.offset, self.path)
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_container(data: bytes, path: Optional[str] = None,
                     version: int = settings.CONTAINER_VERSION) -> Dict[str, np.ndarray]:
    reader = _Reader(data, path)
    magic = reader.take(4, 'magic')
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0, path)
    found, = reader.unpack('<I', 'version')
    if found != version:
        raise FormatError(f"unsupported container version {found}, expected {version}", 4, path)
    count, = reader.unpack('<I', 'entry count')

    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        entry_offset = reader.offset
        length, = reader.unpack('<H', 'name length')
        try:
            name = reader.take(length, 'name').decode('utf-8')
        except UnicodeDecodeError as e:
            raise FormatError(f"tensor name is not UTF-8: {e}", entry_offset + 2, path) from e
        if name in tensors:
            raise FormatError(f"duplicate tensor name '{name}'", entry_offset, path)
        code_offset = reader.offset
        code, rank = reader.unpack('<BB', 'dtype and rank')
        if code not in DTYPES:
            raise FormatError(f"unknown dtype code {code} for '{name}'", code_offset, path)
        dims = reader.unpack(f'<{rank}I', 'dims') if rank else ()
        dtype = DTYPES[code]
        size = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
        payload = reader.take(size, f"payload of '{name}'")
        tensors[name] = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
    if reader.offset != len(data):
        raise FormatError(f"{len(data) - reader.offset} trailing bytes after the last entry", reader.offset, path)
    return tensors


def write_container(path: str, tensors: Mapping[str, np.ndarray]) -> int:
    """Atomic write; returns the file size"""
    data = encode_container(tensors)
    atomic_write(path, data)
    logger.debug(f"[IO] wrote {len(tensors)} tensors ({len(data)} bytes) to {path}")
    return len(data)


def read_container(path: str) -> Dict[str, np.ndarray]:
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as e:
        raise InvalidInputError(f"cannot read container {path}: {e}") from e
    return decode_container(data, path)

"""
Binary sidecar for exact round-trips of coefficient arrays.

Layout, all little-endian:
  magic    4 bytes  b"BZDG"
  version  uint32   1
  ndim     uint32
  dims     ndim x uint64
  data     float64, C order
"""

from typing import Tuple

import numpy as np

MAGIC = b"BZDG"
VERSION = 1


def write_sidecar(file_path: str, array: np.ndarray) -> None:
    array = np.ascontiguousarray(array, dtype='<f8')
    with open(file_path, 'wb') as f:
        f.write(MAGIC)
        f.write(np.array([VERSION, array.ndim], dtype='<u4').tobytes())
        f.write(np.array(array.shape, dtype='<u8').tobytes())
        f.write(array.tobytes())


def _read_exact(f, size: int, file_path: str) -> bytes:
    chunk = f.read(size)
    if len(chunk) != size:
        raise ValueError(f"Sidecar {file_path} is truncated")
    return chunk


def read_sidecar(file_path: str) -> np.ndarray:
    """
    Read an array written by write_sidecar.

    Raises:
        ValueError: On a wrong magic, an unknown version or a truncated file
    """
    with open(file_path, 'rb') as f:
        if _read_exact(f, 4, file_path) != MAGIC:
            raise ValueError(f"{file_path} is not a boltzdg sidecar")
        version, ndim = np.frombuffer(_read_exact(f, 8, file_path), dtype='<u4')
        if version != VERSION:
            raise ValueError(f"Unsupported sidecar version {version} in {file_path}")
        shape: Tuple[int, ...] = tuple(int(n) for n in np.frombuffer(_read_exact(f, 8 * int(ndim), file_path),
                                                                     dtype='<u8'))
        count = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(_read_exact(f, 8 * count, file_path), dtype='<f8')
    return data.reshape(shape).astype(float)

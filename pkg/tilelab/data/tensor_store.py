"""
STAT tensor files: "STAT", u32 version=1, u32 ndims, u64 dims[ndims],
u32 dtype code (1 = float32 little-endian), then the row-major payload
"""
import logging
from pathlib import Path
from typing import Dict, Union

import numpy as np

from tilelab.errors import StorageError

MAGIC = b"STAT"
VERSION = 1
DTYPE_CODES: Dict[int, np.dtype] = {1: np.dtype("<f4")}

PathLike = Union[str, Path]


class TensorStore:
    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def encode(self, array: np.ndarray) -> bytes:
        array = np.asarray(array)
        if not np.all(np.isfinite(array)):
            raise StorageError("refusing to write non-finite values")
        header = (
            MAGIC
            + np.array([VERSION, array.ndim], dtype="<u4").tobytes()
            + np.array(array.shape, dtype="<u8").tobytes()
            + np.array([1], dtype="<u4").tobytes()
        )
        return header + np.ascontiguousarray(array, dtype=DTYPE_CODES[1]).tobytes()

    def decode(self, blob: bytes, source: str = "<bytes>") -> np.ndarray:
        if blob[:4] != MAGIC:
            raise StorageError(f"{source}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
        if len(blob) < 12:
            raise StorageError(f"{source}: truncated header")
        version, ndims = np.frombuffer(blob, dtype="<u4", count=2, offset=4)
        if version != VERSION:
            raise StorageError(f"{source}: unsupported version {version}")
        offset = 12 + 8 * int(ndims)
        if len(blob) < offset + 4:
            raise StorageError(f"{source}: truncated header")
        shape = tuple(int(n) for n in np.frombuffer(blob, dtype="<u8", count=int(ndims), offset=12))
        code = int(np.frombuffer(blob, dtype="<u4", count=1, offset=offset)[0])
        if code not in DTYPE_CODES:
            raise StorageError(f"{source}: unknown dtype code {code}")
        dtype = DTYPE_CODES[code]
        count = int(np.prod(shape, dtype=np.int64))
        payload = blob[offset + 4:]
        if len(payload) != count * dtype.itemsize:
            raise StorageError(
                f"{source}: payload has {len(payload)} bytes, expected {count * dtype.itemsize}"
            )
        return np.frombuffer(payload, dtype=dtype).reshape(shape).astype(np.float32)

    def write(self, path: PathLike, array: np.ndarray) -> Path:
        path = self.write_bytes(path, self.encode(array))
        self.logger.info(f"Wrote {path} shape {tuple(np.shape(array))}")
        return path

    def write_bytes(self, path: PathLike, blob: bytes) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(blob)
        except OSError as e:
            raise StorageError(f"cannot write {path}: {e.strerror or e}")
        return path

    def read(self, path: PathLike) -> np.ndarray:
        path = Path(path)
        try:
            blob = path.read_bytes()
        except OSError as e:
            raise StorageError(f"cannot read {path}: {e.strerror or e}")
        array = self.decode(blob, source=str(path))
        self.logger.debug(f"Read {path} shape {array.shape}")
        return array


def read_tensor(path: PathLike) -> np.ndarray:
    return TensorStore().read(path)


def write_tensor(path: PathLike, array: np.ndarray) -> Path:
    return TensorStore().write(path, array)

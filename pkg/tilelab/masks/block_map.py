"""
Block-level classification of an attention mask into dense, mixed and empty
blocks, and the KV-block schedule a query block consumes
"""
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import Any, Dict, List

import numpy as np
from joblib import Parallel, delayed

from tilelab.errors import ConfigValidationError
from tilelab.grid.flatten import sequence_coords
from tilelab.grid.video_grid import VideoGrid
from tilelab.masks.families import MaskSpec


class BlockType(IntEnum):
    DENSE = 0
    MIXED = 1
    EMPTY = 2


@dataclass(frozen=True)
class BlockCounts:
    dense: int
    mixed: int
    empty: int

    @property
    def total(self) -> int:
        return self.dense + self.mixed + self.empty

    def ratios(self) -> Dict[str, float]:
        return {
            "dense": self.dense / self.total,
            "mixed": self.mixed / self.total,
            "empty": self.empty / self.total,
        }

    def to_dict(self) -> Dict[str, int]:
        return {"dense": self.dense, "mixed": self.mixed, "empty": self.empty}


@dataclass(frozen=True, eq=False)
class BlockMap:
    """Per-(query block, key block) classification of one mask on one grid

    pair_counts[i, j] is the number of attended token pairs inside block
    (i, j); blocks are consecutive runs of block_size tokens in the spec's
    sequence ordering.
    """
    grid: VideoGrid
    spec: MaskSpec
    types: np.ndarray
    pair_counts: np.ndarray
    counts: BlockCounts = field(init=False)
    attended_pair_count: int = field(init=False)

    def __post_init__(self):
        types = self.types
        object.__setattr__(self, "counts", BlockCounts(
            dense=int(np.count_nonzero(types == BlockType.DENSE)),
            mixed=int(np.count_nonzero(types == BlockType.MIXED)),
            empty=int(np.count_nonzero(types == BlockType.EMPTY)),
        ))
        object.__setattr__(self, "attended_pair_count", int(self.pair_counts.sum()))

    @property
    def num_blocks(self) -> int:
        return self.types.shape[0]

    @property
    def ordering(self) -> str:
        return self.spec.ordering

    @cached_property
    def coords(self) -> np.ndarray:
        return sequence_coords(self.grid, self.ordering)

    @cached_property
    def _schedules(self) -> List[np.ndarray]:
        return [np.flatnonzero(row != BlockType.EMPTY) for row in self.types]

    def schedule(self, q_block: int) -> np.ndarray:
        if q_block < 0 or q_block >= self.num_blocks:
            raise ConfigValidationError(
                f"query block {q_block} out of range [0, {self.num_blocks})"
            )
        return self._schedules[q_block]

    def pair_mask(self, q_block: int, k_block: int) -> np.ndarray:
        """(B, B) boolean token mask inside one block"""
        b = self.grid.block_size
        q = self.coords[q_block * b:(q_block + 1) * b]
        k = self.coords[k_block * b:(k_block + 1) * b]
        return self.spec.token_mask(q[:, None, :], k[None, :, :], self.grid)

    @property
    def sparsity(self) -> float:
        return 1.0 - self.attended_pair_count / float(self.grid.num_tokens) ** 2

    def to_dict(self) -> Dict[str, Any]:
        return {
            **self.counts.to_dict(),
            "sparsity": self.sparsity,
            "attended_pairs": self.attended_pair_count,
        }


def kv_block_schedule(q_block: int, block_map: BlockMap) -> List[int]:
    """Ascending non-empty key blocks for one query block"""
    return [int(k) for k in block_map.schedule(q_block)]


def schedule_lengths(block_map: BlockMap) -> np.ndarray:
    return np.count_nonzero(block_map.types != BlockType.EMPTY, axis=1)


class BlockClassifier:
    """Classifies every block of a mask by counting attended token pairs

    Separable masks on tile-ordered blocks are counted per axis and combined
    with Kronecker products, which equals exhaustive enumeration exactly
    because every block is then a product of per-axis token intervals. All
    other masks are enumerated block row by block row.
    """

    def __init__(self, n_jobs: int = 1, rows_per_task: int = 64):
        self.n_jobs = n_jobs
        self.rows_per_task = rows_per_task
        self.logger = logging.getLogger(__name__)

    def classify(self, spec: MaskSpec, grid: VideoGrid, method: str = "auto") -> BlockMap:
        spec.check(grid)
        if method == "auto":
            method = "factorized" if self._factorizable(spec) else "exhaustive"
        if method == "factorized":
            if not self._factorizable(spec):
                raise ConfigValidationError(f"{spec.label} cannot be counted per axis")
            pair_counts = self._factorized_counts(spec, grid)
        elif method == "exhaustive":
            pair_counts = self._exhaustive_counts(spec, grid)
        else:
            raise ConfigValidationError(f"unknown classification method '{method}'")

        full = grid.block_size ** 2
        types = np.full(pair_counts.shape, BlockType.MIXED, dtype=np.int8)
        types[pair_counts == full] = BlockType.DENSE
        types[pair_counts == 0] = BlockType.EMPTY
        block_map = BlockMap(grid=grid, spec=spec, types=types, pair_counts=pair_counts)
        self.logger.info(
            f"Classified {spec.label} on {grid} ({method}): "
            f"dense={block_map.counts.dense} mixed={block_map.counts.mixed} "
            f"empty={block_map.counts.empty}"
        )
        return block_map

    @staticmethod
    def _factorizable(spec: MaskSpec) -> bool:
        return spec.separable and spec.ordering == "tile"

    def _factorized_counts(self, spec: MaskSpec, grid: VideoGrid) -> np.ndarray:
        result = np.ones((1, 1), dtype=np.int64)
        for a, (extent, tile) in enumerate(zip(grid.dims, grid.tile)):
            tokens = np.arange(extent)
            axis = spec.axis_mask(a, tokens[:, None], tokens[None, :], grid)
            axis = np.broadcast_to(axis, (extent, extent))
            n = extent // tile
            per_tile = axis.reshape(n, tile, n, tile).sum(axis=(1, 3), dtype=np.int64)
            result = np.kron(result, per_tile)
        return result

    def _exhaustive_counts(self, spec: MaskSpec, grid: VideoGrid) -> np.ndarray:
        coords = sequence_coords(grid, spec.ordering)
        b, nb = grid.block_size, grid.num_blocks
        starts = range(0, nb, self.rows_per_task)

        def count_rows(start: int) -> np.ndarray:
            stop = min(start + self.rows_per_task, nb)
            rows = np.empty((stop - start, nb), dtype=np.int64)
            for r in range(start, stop):
                q = coords[r * b:(r + 1) * b]
                mask = spec.token_mask(q[:, None, :], coords[None, :, :], grid)
                rows[r - start] = mask.reshape(b, nb, b).sum(axis=(0, 2))
                self.logger.debug(f"block row {r}/{nb}")
            return rows

        if self.n_jobs == 1:
            parts = [count_rows(s) for s in starts]
        else:
            parts = Parallel(n_jobs=self.n_jobs, prefer="threads")(
                delayed(count_rows)(s) for s in starts
            )
        return np.concatenate(parts, axis=0)


def classify_blocks(spec: MaskSpec, grid: VideoGrid, n_jobs: int = 1,
                    method: str = "auto") -> BlockMap:
    return BlockClassifier(n_jobs=n_jobs).classify(spec, grid, method=method)

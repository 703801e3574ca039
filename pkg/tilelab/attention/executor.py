"""
Block-sparse attention with online softmax over the KV-block schedule

Inputs and output are in the block map's sequence order (tile order for every
family except plain NATTEN, which blocks zigzag chunks). The inner loop only
sees the key blocks it is handed; which blocks those are is decided by the
schedule, and empty blocks are never read.
"""
import logging
from typing import Callable, Optional

import numpy as np
from joblib import Parallel, delayed

from tilelab.attention.tensors import AttnConfig, check_head_tensors
from tilelab.errors import ConfigValidationError
from tilelab.masks.block_map import BlockMap, BlockType

ScheduleOrder = Callable[[np.ndarray], np.ndarray]


class BlockSparseExecutor:
    def __init__(self, block_map: BlockMap, config: Optional[AttnConfig] = None,
                 n_jobs: int = 1, schedule_order: Optional[ScheduleOrder] = None):
        self.block_map = block_map
        self.config = config or AttnConfig()
        self.n_jobs = n_jobs
        self.schedule_order = schedule_order
        self.logger = logging.getLogger(__name__)

    def run(self, q: np.ndarray, k: np.ndarray, v: np.ndarray,
            scale: Optional[float] = None) -> np.ndarray:
        """One head: (N, d) inputs to (N, d) output in working precision"""
        return self.run_heads(q[None], k[None], v[None], scale=scale)[0]

    def run_heads(self, q: np.ndarray, k: np.ndarray, v: np.ndarray,
                  scale: Optional[float] = None) -> np.ndarray:
        """(heads, N, d) inputs; one task per (head, query block)"""
        if q.ndim != 3 or q.shape != k.shape or k.shape != v.shape:
            raise ConfigValidationError(
                f"expected matching (heads, N, d) tensors, got Q{q.shape} K{k.shape} V{v.shape}"
            )
        for h in range(q.shape[0]):
            check_head_tensors(q[h], k[h], v[h], self.block_map.grid.num_tokens)
        dtype = self.config.working
        scale = dtype(self.config.scale_for(q.shape[2]) if scale is None else scale)
        q, k, v = (x.astype(dtype, copy=False) for x in (q, k, v))

        heads, nb = q.shape[0], self.block_map.num_blocks
        tasks = [(h, qb) for h in range(heads) for qb in range(nb)]
        if self.n_jobs == 1:
            blocks = [self._query_block(q[h], k[h], v[h], qb, scale) for h, qb in tasks]
        else:
            blocks = Parallel(n_jobs=self.n_jobs, prefer="threads")(
                delayed(self._query_block)(q[h], k[h], v[h], qb, scale) for h, qb in tasks
            )
        b = self.block_map.grid.block_size
        out = np.empty_like(v)
        for (h, qb), block in zip(tasks, blocks):
            out[h, qb * b:(qb + 1) * b] = block
        self.logger.debug(f"Executed {heads} head(s) over {nb} query blocks")
        return out

    def _query_block(self, q, k, v, q_block: int, scale) -> np.ndarray:
        b = self.block_map.grid.block_size
        rows = slice(q_block * b, (q_block + 1) * b)
        q_tile = q[rows]
        dtype = q.dtype
        running_max = np.full(b, -np.inf, dtype=dtype)
        normalizer = np.zeros(b, dtype=dtype)
        acc = np.zeros((b, v.shape[1]), dtype=dtype)

        schedule = self.block_map.schedule(q_block)
        if self.schedule_order is not None:
            schedule = self.schedule_order(schedule)
        for k_block in schedule:
            cols = slice(k_block * b, (k_block + 1) * b)
            scores = (q_tile @ k[cols].T) * scale
            if self.block_map.types[q_block, k_block] == BlockType.MIXED:
                scores = np.where(self.block_map.pair_mask(q_block, k_block), scores, -np.inf)
            block_max = np.maximum(running_max, scores.max(axis=1))
            # Rows with nothing attended yet keep a -inf max; shift them by 0
            shift = np.where(np.isfinite(block_max), block_max, 0).astype(dtype)
            weights = np.exp(scores - shift[:, None])
            rescale = np.exp(running_max - shift)
            normalizer = normalizer * rescale + weights.sum(axis=1)
            acc = acc * rescale[:, None] + weights @ v[cols]
            running_max = block_max

        empty_rows = np.flatnonzero(normalizer == 0)
        if empty_rows.size:
            raise ConfigValidationError(
                f"query row {q_block * b + int(empty_rows[0])} has no unmasked key"
            )
        return acc / normalizer[:, None]


def block_sparse_attention(q: np.ndarray, k: np.ndarray, v: np.ndarray,
                           block_map: BlockMap, config: Optional[AttnConfig] = None,
                           n_jobs: int = 1) -> np.ndarray:
    return BlockSparseExecutor(block_map, config=config, n_jobs=n_jobs).run(q, k, v)

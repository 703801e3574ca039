"""
Benchmark and tensor-generation workflows behind the bench and gen-tensors
commands
"""
import hashlib
import logging
import time
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from tilelab.attention.executor import BlockSparseExecutor
from tilelab.attention.flops import dense_flops, flops_estimate
from tilelab.attention.oracle import dense_attention_oracle
from tilelab.attention.tensors import AttnConfig
from tilelab.data.prng import PRNG_NAME, standard_normal
from tilelab.data.tensor_store import TensorStore
from tilelab.errors import ConfigValidationError
from tilelab.grid.video_grid import VideoGrid
from tilelab.masks.block_map import BlockClassifier
from tilelab.masks.families import FullSpec, MaskSpec
from tilelab.masks.token_mask import TokenMask

logger = logging.getLogger(__name__)

TENSOR_NAMES = ("q", "k", "v")


def bench(spec: MaskSpec, grid: VideoGrid, heads: int, d: int, repeats: int,
          seed: int = 0, n_jobs: int = 1, config: Optional[AttnConfig] = None) -> Dict[str, Any]:
    """Static cost model of one mask, plus executor/oracle timings when repeats > 0

    Wall times are informational. max_abs_err compares the executor against the
    float64 oracle on the same seeded inputs.
    """
    if heads < 1 or d < 1:
        raise ConfigValidationError(f"heads and d must be positive, got heads={heads} d={d}")
    if repeats < 0:
        raise ConfigValidationError(f"repeats must be >= 0, got {repeats}")
    spec.check(grid)
    block_map = BlockClassifier(n_jobs=n_jobs).classify(spec, grid)
    level = block_map.sparsity
    n = grid.num_tokens
    report: Dict[str, Any] = {
        "mask": spec.label,
        "grid": grid.to_dict(),
        "heads": heads,
        "d": d,
        "sparsity": level,
        "flops_estimate": flops_estimate(n, d, heads, level),
        "dense_flops": dense_flops(n, d, heads),
        "blocks": block_map.counts.to_dict(),
    }
    if repeats == 0:
        return report

    q, k, v = (standard_normal(seed, (heads, n, d), index, dtype=np.float32) for index in range(3))
    executor = BlockSparseExecutor(block_map, config=config, n_jobs=n_jobs)
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        out = executor.run_heads(q, k, v)
        timings.append(time.perf_counter() - start)

    mask = None if isinstance(spec, FullSpec) else TokenMask(spec, grid)
    start = time.perf_counter()
    reference = np.stack([dense_attention_oracle(q[h], k[h], v[h], mask=mask) for h in range(heads)])
    oracle_seconds = time.perf_counter() - start

    report.update({
        "repeats": repeats,
        "executor_seconds": min(timings),
        "oracle_seconds": oracle_seconds,
        "max_abs_err": float(np.max(np.abs(out.astype(np.float64) - reference))),
    })
    logger.info(f"bench {spec.label}: executor {min(timings):.3f}s oracle {oracle_seconds:.3f}s")
    return report


def gen_tensors(seed: int, num_tokens: int, d: int, heads: int,
                out: Union[str, Path]) -> Dict[str, Any]:
    """Write q.stat, k.stat and v.stat of shape (heads, N, d) into directory out

    Tensor i of (q, k, v) draws from stream (seed, i); equal seeds give
    byte-identical files.
    """
    for name, value in (("N", num_tokens), ("d", d), ("heads", heads)):
        if value < 1:
            raise ConfigValidationError(f"{name} must be positive, got {value}")
    out = Path(out)
    store = TensorStore()
    files = {}
    for index, name in enumerate(TENSOR_NAMES):
        blob = store.encode(standard_normal(seed, (heads, num_tokens, d), index))
        path = store.write_bytes(out / f"{name}.stat", blob)
        files[name] = {"path": str(path), "sha256": hashlib.sha256(blob).hexdigest()}
    return {"prng": PRNG_NAME, "seed": seed, "shape": [heads, num_tokens, d], "files": files}

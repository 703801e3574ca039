"""
Attention recall: how much of each query's softmax mass lands inside its
clamped local window under full attention
"""
from typing import Optional

import numpy as np

from tilelab.attention.oracle import softmax_rows
from tilelab.attention.tensors import default_scale
from tilelab.errors import ConfigValidationError
from tilelab.grid.flatten import sequence_coords
from tilelab.grid.video_grid import Dims3, VideoGrid
from tilelab.masks.predicates import check_natten_window, natten_axis


def attention_recall(q: np.ndarray, k: np.ndarray, grid: VideoGrid, window: Dims3,
                     scale: Optional[float] = None, bias: Optional[np.ndarray] = None,
                     per_query: bool = False, chunk: int = 256):
    """Mean over queries of the probability mass inside the query's window

    q and k are zigzag-ordered (N, d). bias, when given, is an additive
    (N, N) logit term applied before the softmax.
    """
    check_natten_window(grid.dims, window)
    n = grid.num_tokens
    if q.ndim != 2 or q.shape != k.shape or q.shape[0] != n:
        raise ConfigValidationError(
            f"expected Q and K of shape ({n}, d), got Q{q.shape} K{k.shape}"
        )
    if bias is not None and bias.shape != (n, n):
        raise ConfigValidationError(f"bias must have shape ({n}, {n}), got {bias.shape}")
    scale = default_scale(q.shape[1]) if scale is None else scale
    q = q.astype(np.float64, copy=False)
    k = k.astype(np.float64, copy=False)
    coords = sequence_coords(grid, "zigzag")
    dims, sizes = grid.dims.as_tuple(), window.as_tuple()

    recall = np.empty(n, dtype=np.float64)
    for start in range(0, n, chunk):
        rows = slice(start, min(start + chunk, n))
        logits = (q[rows] @ k.T) * scale
        if bias is not None:
            logits = logits + bias[rows]
        probs = softmax_rows(logits)
        inside = np.ones(probs.shape, dtype=bool)
        for a in range(3):
            inside &= natten_axis(coords[rows, a][:, None], coords[None, :, a], dims[a], sizes[a])
        recall[rows] = np.where(inside, probs, 0.0).sum(axis=1)
    return recall if per_query else float(recall.mean())

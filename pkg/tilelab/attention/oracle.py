"""
Dense masked attention reference, one query row at a time in double precision
"""
import logging
from typing import Callable, Optional

import numpy as np

from tilelab.attention.tensors import check_head_tensors, default_scale
from tilelab.errors import ConfigValidationError

logger = logging.getLogger(__name__)

# Additive logit for masked keys; exp underflows to exactly 0 after max subtraction
MASKED_LOGIT = -1e30

RowMask = Callable[[np.ndarray, np.ndarray], np.ndarray]


def dense_attention_oracle(q: np.ndarray, k: np.ndarray, v: np.ndarray,
                           mask: Optional[RowMask] = None,
                           scale: Optional[float] = None,
                           dtype=np.float64) -> np.ndarray:
    """softmax(Q K^T * scale + M) V with M = 0 where mask allows, -1e30 elsewhere

    mask is called as mask(query_index, key_indices) and must return a bool
    array over key_indices; None means full attention.
    """
    check_head_tensors(q, k, v)
    n = q.shape[0]
    scale = default_scale(q.shape[1]) if scale is None else scale
    q, k, v = (x.astype(dtype, copy=False) for x in (q, k, v))
    keys = np.arange(n)
    out = np.empty_like(v)
    for i in range(n):
        logits = (k @ q[i]) * scale
        if mask is not None:
            allowed = np.broadcast_to(mask(i, keys), (n,))
            if not allowed.any():
                raise ConfigValidationError(f"query row {i} has no unmasked key")
            logits = logits + np.where(allowed, 0.0, MASKED_LOGIT)
        weights = np.exp(logits - logits.max())
        out[i] = (weights / weights.sum()) @ v
    return out


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction"""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=-1, keepdims=True)

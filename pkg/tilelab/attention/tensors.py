"""
Head tensor validation and attention configuration
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from tilelab.errors import ConfigValidationError

DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass(frozen=True)
class AttnConfig:
    """Working precision runs the executor, oracle precision the reference"""
    heads: int = 1
    d: int = 64
    scale: Optional[float] = None
    working_dtype: str = "float32"
    oracle_dtype: str = "float64"

    def __post_init__(self):
        if self.scale is not None and not self.scale > 0:
            raise ConfigValidationError(f"attention scale must be > 0, got {self.scale}")
        for name in (self.working_dtype, self.oracle_dtype):
            if name not in DTYPES:
                raise ConfigValidationError(f"unknown dtype '{name}', expected one of {sorted(DTYPES)}")

    def scale_for(self, d: int) -> float:
        return self.scale if self.scale is not None else default_scale(d)

    @property
    def working(self):
        return DTYPES[self.working_dtype]

    @property
    def oracle(self):
        return DTYPES[self.oracle_dtype]


def check_head_tensors(q: np.ndarray, k: np.ndarray, v: np.ndarray,
                       num_tokens: Optional[int] = None) -> None:
    """Q, K, V must be finite (N, d) matrices of one shape"""
    for name, x in (("Q", q), ("K", k), ("V", v)):
        if x.ndim != 2:
            raise ConfigValidationError(f"{name} must be a 2-D (N, d) matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ConfigValidationError(f"{name} contains non-finite entries")
    if q.shape != k.shape or k.shape != v.shape:
        raise ConfigValidationError(f"shape mismatch: Q{q.shape} K{k.shape} V{v.shape}")
    if num_tokens is not None and q.shape[0] != num_tokens:
        raise ConfigValidationError(
            f"tensors have {q.shape[0]} rows but the grid has {num_tokens} tokens"
        )


def default_scale(d: int) -> float:
    return 1.0 / math.sqrt(d)

"""
FLOP model of the attention core: QK^T and PV, multiply-add counted as 2
"""
from tilelab.errors import ConfigValidationError


def dense_flops(num_tokens: int, d: int, heads: int) -> int:
    return 4 * num_tokens * num_tokens * d * heads


def flops_estimate(num_tokens: int, d: int, heads: int, sparsity: float) -> float:
    """4 * N^2 * d * heads * (1 - sparsity); softmax cost excluded"""
    if not 0.0 <= sparsity <= 1.0:
        raise ConfigValidationError(f"sparsity must be in [0, 1], got {sparsity}")
    return dense_flops(num_tokens, d, heads) * (1.0 - sparsity)


def tflops(flops: float) -> float:
    return flops / 1e12

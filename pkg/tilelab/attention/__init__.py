"""
Masked attention: dense oracle, block-sparse executor, recall and FLOP model
"""
from tilelab.attention.executor import BlockSparseExecutor, block_sparse_attention
from tilelab.attention.flops import dense_flops, flops_estimate, tflops
from tilelab.attention.oracle import MASKED_LOGIT, dense_attention_oracle, softmax_rows
from tilelab.attention.recall import attention_recall
from tilelab.attention.tensors import AttnConfig, check_head_tensors, default_scale

__all__ = [
    "BlockSparseExecutor",
    "block_sparse_attention",
    "dense_flops",
    "flops_estimate",
    "tflops",
    "MASKED_LOGIT",
    "dense_attention_oracle",
    "softmax_rows",
    "attention_recall",
    "AttnConfig",
    "check_head_tensors",
    "default_scale",
]

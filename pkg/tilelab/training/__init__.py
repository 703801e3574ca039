"""
Fine-tuning loss terms
"""
from tilelab.training.losses import (
    FinetuneObjective,
    LossWeights,
    attn_distill_loss,
    combined_loss,
    data_loss,
    final_layer_loss,
)

__all__ = [
    "FinetuneObjective",
    "LossWeights",
    "attn_distill_loss",
    "combined_loss",
    "data_loss",
    "final_layer_loss",
]

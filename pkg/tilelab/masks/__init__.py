"""
Attention mask families, block classification and sparsity accounting
"""
from tilelab.masks.analytic import (
    attended_pair_count,
    compare_analytic,
    natten_block_counts_analytic,
    sparsity,
    sta_block_counts_analytic,
)
from tilelab.masks.block_map import (
    BlockClassifier,
    BlockCounts,
    BlockMap,
    BlockType,
    classify_blocks,
    kv_block_schedule,
    schedule_lengths,
)
from tilelab.masks.families import (
    CLEARSpec,
    FullSpec,
    MaskSpec,
    NATTENSpec,
    STASpec,
    SwinSpec,
    TiledNATTENSpec,
    parse_mask_spec,
    parse_mask_specs,
)
from tilelab.masks.predicates import clear_mask, natten_mask, sta_mask, swin_mask
from tilelab.masks.token_mask import TokenMask

__all__ = [
    "attended_pair_count",
    "compare_analytic",
    "natten_block_counts_analytic",
    "sparsity",
    "sta_block_counts_analytic",
    "BlockClassifier",
    "BlockCounts",
    "BlockMap",
    "BlockType",
    "classify_blocks",
    "kv_block_schedule",
    "schedule_lengths",
    "CLEARSpec",
    "FullSpec",
    "MaskSpec",
    "NATTENSpec",
    "STASpec",
    "SwinSpec",
    "TiledNATTENSpec",
    "parse_mask_spec",
    "parse_mask_specs",
    "clear_mask",
    "natten_mask",
    "sta_mask",
    "swin_mask",
    "TokenMask",
]

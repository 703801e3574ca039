"""
Per-head mask search over a deterministic toy attention stack
"""
from tilelab.search.head_stats import recall_stats, recall_stats_rows
from tilelab.search.mask_search import (
    MaskSearcher,
    SearchDict,
    SearchResult,
    mask_search,
    search_summary,
)
from tilelab.search.toy_model import ForwardTrace, ToyModel, ToyModelConfig, toy_forward

__all__ = [
    "recall_stats",
    "recall_stats_rows",
    "MaskSearcher",
    "SearchDict",
    "SearchResult",
    "mask_search",
    "search_summary",
    "ForwardTrace",
    "ToyModel",
    "ToyModelConfig",
    "toy_forward",
]

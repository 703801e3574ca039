"""
Per-head attention recall across prompts: locality strength and its
stability from prompt to prompt
"""
import logging
from typing import Dict, List, Sequence

import numpy as np

from tilelab.attention.recall import attention_recall
from tilelab.attention.tensors import default_scale
from tilelab.errors import ConfigValidationError
from tilelab.grid.video_grid import Dims3
from tilelab.search.toy_model import HeadKey, ToyModel

logger = logging.getLogger(__name__)


def recall_stats(model: ToyModel, prompts: Sequence[np.ndarray],
                 window: Dims3) -> Dict[HeadKey, Dict[str, float]]:
    """Mean and (population) standard deviation of recall per (layer, head)"""
    if len(prompts) < 2:
        raise ConfigValidationError(f"recall statistics need at least 2 prompts, got {len(prompts)}")
    samples: Dict[HeadKey, List[float]] = {key: [] for key in model.head_keys()}
    scale = default_scale(model.config.head_dim)
    for index, x in enumerate(prompts):
        trace = model.trace(x, model.full_assignment())
        for layer, layer_input in enumerate(trace.inputs):
            for head in range(model.heads):
                q, k, bias = model.head_logits(layer_input, layer, head)
                samples[(layer, head)].append(
                    attention_recall(q, k, model.grid, window, scale=scale, bias=bias)
                )
        logger.debug(f"recall computed for prompt {index}")
    return {
        key: {"mean_recall": float(np.mean(values)), "std_recall": float(np.std(values))}
        for key, values in samples.items()
    }


def recall_stats_rows(stats: Dict[HeadKey, Dict[str, float]]) -> List[Dict[str, float]]:
    """Flat rows layer, head, mean_recall, std_recall in (layer, head) order"""
    return [
        {"layer": layer, "head": head, **values}
        for (layer, head), values in sorted(stats.items())
    ]

"""
Deterministic multi-head attention stack with planted per-head locality,
used as the model under search
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from tilelab.attention.oracle import softmax_rows
from tilelab.attention.tensors import default_scale
from tilelab.data.prng import make_rng
from tilelab.errors import ConfigValidationError
from tilelab.grid.video_grid import VideoGrid
from tilelab.masks.families import FullSpec, MaskSpec, STASpec, SwinSpec
from tilelab.masks.token_mask import TokenMask

HeadKey = Tuple[int, int]
Assignment = Dict[HeadKey, MaskSpec]


class ToyModelConfig(BaseModel):
    """Shape, seed and planted locality of the toy model

    plants lists one STA window per head index (shared by all layers); a head
    with a planted window gets an additive logit of -sharpness on every key
    outside that window, None leaves the head unbiased.
    """
    model_config = ConfigDict(extra="forbid")

    layers: int = Field(2, ge=0)
    heads: int = Field(4, ge=1)
    width: int = Field(64, ge=1)
    dims: Tuple[int, int, int] = (8, 8, 8)
    tile: Tuple[int, int, int] = (2, 2, 2)
    seed: int = 7
    sharpness: float = Field(30.0, ge=0)
    plants: Optional[List[Optional[Tuple[int, int, int]]]] = None
    alternate_swin: bool = True

    @field_validator("width")
    @classmethod
    def _divisible(cls, value, info):
        heads = info.data.get("heads")
        if heads and value % heads != 0:
            raise ValueError(f"width {value} is not divisible by heads {heads}")
        return value

    @property
    def head_dim(self) -> int:
        return self.width // self.heads

    def grid(self) -> VideoGrid:
        return VideoGrid.build(self.dims, self.tile)


@dataclass
class ForwardTrace:
    """Per-layer inputs and outputs of one forward pass"""
    inputs: List[np.ndarray]
    outputs: List[np.ndarray]


class ToyModel:
    """Residual stack: x <- x + concat_h(softmax(q k^T / sqrt(d) + bias_h | mask_h) v) W_o"""

    def __init__(self, config: Optional[ToyModelConfig] = None):
        self.config = config or ToyModelConfig()
        self.grid = self.config.grid()
        self.logger = logging.getLogger(__name__)
        self._mask_cache: Dict[MaskSpec, np.ndarray] = {}
        self._init_parameters()

    @property
    def layers(self) -> int:
        return self.config.layers

    @property
    def heads(self) -> int:
        return self.config.heads

    def head_keys(self) -> List[HeadKey]:
        return [(l, h) for l in range(self.layers) for h in range(self.heads)]

    def full_assignment(self) -> Assignment:
        return {key: FullSpec() for key in self.head_keys()}

    def _init_parameters(self) -> None:
        cfg = self.config
        rng = make_rng(cfg.seed, 0)
        d, width = cfg.head_dim, cfg.width
        shape = (cfg.layers, cfg.heads, width, d)
        self.w_q = rng.standard_normal(shape) / np.sqrt(width)
        self.w_k = rng.standard_normal(shape) / np.sqrt(width)
        self.w_v = rng.standard_normal(shape) / np.sqrt(width)
        self.w_o = rng.standard_normal((cfg.layers, cfg.heads, d, width)) / np.sqrt(d)

        plants = cfg.plants if cfg.plants is not None else [None] * cfg.heads
        if len(plants) != cfg.heads:
            raise ConfigValidationError(f"expected {cfg.heads} planted windows, got {len(plants)}")
        self.biases: List[Optional[np.ndarray]] = []
        for window in plants:
            if window is None:
                self.biases.append(None)
                continue
            inside = self._mask(STASpec(window=window))
            self.biases.append(np.where(inside, 0.0, -cfg.sharpness))

    def _mask(self, spec: MaskSpec) -> np.ndarray:
        if spec not in self._mask_cache:
            self._mask_cache[spec] = TokenMask(spec, self.grid, ordering="zigzag").dense()
        return self._mask_cache[spec]

    def layer_spec(self, spec: MaskSpec, layer: int) -> MaskSpec:
        """Swin shifts its windows on every other layer"""
        if self.config.alternate_swin and isinstance(spec, SwinSpec) and layer % 2 == 1:
            return spec.with_shift(not spec.shifted)
        return spec

    def head_logits(self, x: np.ndarray, layer: int, head: int):
        """(q, k, bias) of one head for layer input x"""
        q = x @ self.w_q[layer, head]
        k = x @ self.w_k[layer, head]
        return q, k, self.biases[head]

    def forward(self, x: np.ndarray, assignment: Assignment) -> np.ndarray:
        trace = self.trace(x, assignment)
        return trace.outputs[-1] if trace.outputs else x.copy()

    def trace(self, x: np.ndarray, assignment: Assignment) -> ForwardTrace:
        self._check_input(x)
        missing = [key for key in self.head_keys() if key not in assignment]
        if missing:
            raise ConfigValidationError(f"assignment has no mask for (layer, head) {missing[0]}")
        trace = ForwardTrace(inputs=[], outputs=[])
        scale = default_scale(self.config.head_dim)
        for layer in range(self.layers):
            trace.inputs.append(x)
            update = np.zeros_like(x)
            for head in range(self.heads):
                q, k, bias = self.head_logits(x, layer, head)
                logits = (q @ k.T) * scale
                if bias is not None:
                    logits = logits + bias
                spec = self.layer_spec(assignment[(layer, head)], layer)
                if not isinstance(spec, FullSpec):
                    logits = np.where(self._mask(spec), logits, -np.inf)
                head_out = softmax_rows(logits) @ (x @ self.w_v[layer, head])
                update += head_out @ self.w_o[layer, head]
            x = x + update
            trace.outputs.append(x)
        return trace

    def _check_input(self, x: np.ndarray) -> None:
        expected = (self.grid.num_tokens, self.config.width)
        if x.shape != expected:
            raise ConfigValidationError(f"toy model input must have shape {expected}, got {x.shape}")

    def sample_inputs(self, seed: int, index: int) -> np.ndarray:
        """Seeded standard-normal token matrix; index selects the stream"""
        return make_rng(seed, 1, index).standard_normal((self.grid.num_tokens, self.config.width))


def toy_forward(model: ToyModel, x: np.ndarray, assignment: Assignment) -> np.ndarray:
    return model.forward(x, assignment)

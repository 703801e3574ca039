"""
Settings loaded from config.yaml into typed models
"""
import logging
import os
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from tilelab.errors import ConfigValidationError, StorageError
from tilelab.grid.video_grid import VideoGrid
from tilelab.masks.families import MaskSpec
from tilelab.search.toy_model import ToyModelConfig

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config.yaml"
CONFIG_ENV = "TILELAB_CONFIG"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridConfig(_Strict):
    """JSON grid document {"dims": [t,h,w], "tile": [t,h,w]}"""
    dims: Tuple[int, int, int]
    tile: Tuple[int, int, int] = (1, 1, 1)

    def to_grid(self) -> VideoGrid:
        return VideoGrid.build(self.dims, self.tile)


class LoggingSettings(_Strict):
    level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"


class AttentionSettings(_Strict):
    working_dtype: Literal["float32", "float64"] = "float32"
    oracle_dtype: Literal["float64"] = "float64"
    tolerance: float = Field(1e-5, gt=0)
    heads: int = Field(24, ge=1)
    d: int = Field(128, ge=1)


class SearchSettings(_Strict):
    delta: float = Field(1e-3, ge=0)
    delta_mode: Literal["relative", "absolute"] = "relative"
    steps: int = Field(3, ge=1)
    prompts: int = Field(2, ge=2)
    seed: int = 7
    cumulative: bool = False
    recall_window: Tuple[int, int, int] = (3, 3, 3)


class ReferenceConfig(_Strict):
    """A named mask configuration with its published sparsity and TFLOPS, when known"""
    name: str
    spec: MaskSpec
    published_sparsity: Optional[float] = None
    published_tflops: Optional[float] = None


class CompareSettings(_Strict):
    grid: str = "hunyuan-720p"
    max_exhaustive_tokens: int = Field(16384, ge=1)
    configs: List[ReferenceConfig] = Field(default_factory=lambda: _default_catalogue())


def _default_grids() -> Dict[str, GridConfig]:
    return {
        "hunyuan-720p": GridConfig(dims=(30, 48, 80), tile=(6, 8, 8)),
        "cube-48": GridConfig(dims=(48, 48, 48), tile=(4, 4, 4)),
        "toy": GridConfig(dims=(8, 8, 8), tile=(2, 2, 2)),
        "image-2d": GridConfig(dims=(1, 64, 64), tile=(1, 8, 8)),
    }


def _default_toy_model() -> ToyModelConfig:
    return ToyModelConfig(plants=[(2, 2, 2), (6, 6, 6), (2, 2, 2), (6, 6, 6)])


def _default_catalogue() -> List[ReferenceConfig]:
    """Mask configurations compared on the 720p grid, with published figures"""
    catalogue = [
        ("clear-r16", {"family": "clear", "radius": 16}, 0.9046, 15.65),
        ("clear-r32", {"family": "clear", "radius": 32}, 0.5623, 71.80),
        ("natten-19-25-25", {"family": "natten", "window": [19, 25, 25]}, 0.8969, 16.91),
        ("tiled-natten-19-25-25", {"family": "tiled_natten", "window": [19, 25, 25]}, 0.8969, 16.91),
        ("tiled-natten-29-41-41", {"family": "tiled_natten", "window": [29, 41, 41]}, 0.5768, 69.41),
        ("swin-15-24-40", {"family": "swin", "window": [15, 24, 40]}, None, None),
        ("sta-18-24-24", {"family": "sta", "window": [18, 24, 24]}, 0.9100, 14.76),
        ("sta-30-40-40", {"family": "sta", "window": [30, 40, 40]}, 0.5833, 68.35),
    ]
    return [
        ReferenceConfig(name=name, spec=spec, published_sparsity=level, published_tflops=flops)
        for name, spec, level, flops in catalogue
    ]


class TileLabSettings(_Strict):
    logging: LoggingSettings = Field(default_factory=LoggingSettings)
    threads: int = Field(1, ge=1)
    grids: Dict[str, GridConfig] = Field(default_factory=_default_grids)
    attention: AttentionSettings = Field(default_factory=AttentionSettings)
    toy_model: ToyModelConfig = Field(default_factory=_default_toy_model)
    search: SearchSettings = Field(default_factory=SearchSettings)
    compare: CompareSettings = Field(default_factory=CompareSettings)


def load_settings(path: Optional[Union[str, Path]] = None) -> TileLabSettings:
    """Read settings from path, $TILELAB_CONFIG, or the repository config.yaml"""
    resolved = Path(path or os.environ.get(CONFIG_ENV) or DEFAULT_CONFIG_PATH)
    return _load(str(resolved.resolve()))


@lru_cache(maxsize=8)
def _load(path: str) -> TileLabSettings:
    if not Path(path).exists():
        logger.debug(f"No config at {path}, using built-in defaults")
        return TileLabSettings()
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle) or {}
    except OSError as e:
        raise StorageError(f"cannot read config {path}: {e.strerror or e}")
    except yaml.YAMLError as e:
        raise ConfigValidationError(f"config {path} is not valid YAML: {e}")
    try:
        return TileLabSettings.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first.get("loc", ()))
        raise ConfigValidationError(f"config {path}: {location}: {first.get('msg')}")

"""
Grid value types: token dims, tile shape and the derived tile grid
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from tilelab.errors import ConfigValidationError

AXES = ("t", "h", "w")


@dataclass(frozen=True)
class Dims3:
    """Extent along (temporal, height, width); a 2D image uses t = 1"""
    t: int
    h: int
    w: int

    def __post_init__(self):
        for axis, value in zip(AXES, (self.t, self.h, self.w)):
            if int(value) != value or value < 1:
                raise ConfigValidationError(f"dims.{axis} must be a positive integer, got {value}")

    @classmethod
    def of(cls, values: Sequence[int]) -> "Dims3":
        if isinstance(values, Dims3):
            return values
        if len(values) != 3:
            raise ConfigValidationError(f"expected 3 values (t,h,w), got {len(values)}")
        return cls(*(int(v) for v in values))

    @classmethod
    def parse(cls, text: str) -> "Dims3":
        """Parse the CLI form 't,h,w'"""
        try:
            values = [int(part) for part in text.split(",")]
        except ValueError:
            raise ConfigValidationError(f"cannot parse dims '{text}', expected t,h,w")
        return cls.of(values)

    def __iter__(self) -> Iterator[int]:
        return iter((self.t, self.h, self.w))

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.t, self.h, self.w)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.int64)

    @property
    def volume(self) -> int:
        return self.t * self.h * self.w

    def __str__(self) -> str:
        return f"({self.t},{self.h},{self.w})"


@dataclass(frozen=True)
class TokenCoord:
    """Integer token position; bounds are checked against a grid when used"""
    t: int
    h: int
    w: int

    def __iter__(self) -> Iterator[int]:
        return iter((self.t, self.h, self.w))

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.t, self.h, self.w)

    def check_bounds(self, dims: Dims3) -> None:
        for axis, value, extent in zip(AXES, self, dims):
            if value < 0 or value >= extent:
                raise ConfigValidationError(
                    f"coordinate {axis}={value} out of bounds for dims.{axis}={extent}"
                )


@dataclass(frozen=True)
class VideoGrid:
    """Token grid L partitioned into tiles T; one tile is one attention block"""
    dims: Dims3
    tile: Dims3

    def __post_init__(self):
        for axis, extent, size in zip(AXES, self.dims, self.tile):
            if extent % size != 0:
                raise ConfigValidationError(
                    f"tile.{axis}={size} does not divide dims.{axis}={extent}"
                )

    @classmethod
    def build(cls, dims: Sequence[int], tile: Optional[Sequence[int]] = None) -> "VideoGrid":
        dims3 = Dims3.of(dims)
        return cls(dims3, Dims3.of(tile) if tile is not None else Dims3(1, 1, 1))

    @classmethod
    def from_preset(cls, name: str, settings=None) -> "VideoGrid":
        """Named grid from config.yaml"""
        if settings is None:
            from tilelab.config import load_settings
            settings = load_settings()
        if name not in settings.grids:
            known = ", ".join(sorted(settings.grids))
            raise ConfigValidationError(f"unknown grid preset '{name}' (known: {known})")
        return settings.grids[name].to_grid()

    @cached_property
    def tile_grid(self) -> Dims3:
        return Dims3(*(extent // size for extent, size in zip(self.dims, self.tile)))

    @property
    def block_size(self) -> int:
        return self.tile.volume

    @property
    def num_tokens(self) -> int:
        return self.dims.volume

    @property
    def num_blocks(self) -> int:
        return self.num_tokens // self.block_size

    def to_dict(self) -> dict:
        return {"dims": list(self.dims), "tile": list(self.tile)}

    def __str__(self) -> str:
        return f"dims {self.dims} tile {self.tile}"

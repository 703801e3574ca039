"""
MaskSpec: the attention family plus its parameters, parsed from JSON documents
such as {"family": "sta", "window": [18, 24, 24]}
"""
from typing import Annotated, Any, ClassVar, Dict, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, field_validator

from tilelab.errors import ConfigValidationError
from tilelab.grid.video_grid import Dims3, VideoGrid
from tilelab.masks import predicates


class _SpecBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    # Tokens are grouped into blocks along this sequence order
    ordering: ClassVar[str] = "tile"
    separable: ClassVar[bool] = True

    def check(self, grid: VideoGrid) -> None:
        """Raise ConfigValidationError if the spec is not valid on grid"""

    def axis_mask(self, axis: int, q, k, grid: VideoGrid):
        """Per-axis factor of a separable predicate"""
        return np.ones(np.broadcast_shapes(np.shape(q), np.shape(k)), dtype=bool)

    def token_mask(self, q: np.ndarray, k: np.ndarray, grid: VideoGrid) -> np.ndarray:
        """Predicate over broadcastable (..., 3) coordinate arrays"""
        result = np.ones(np.broadcast_shapes(q.shape[:-1], k.shape[:-1]), dtype=bool)
        for a in range(3):
            result &= self.axis_mask(a, q[..., a], k[..., a], grid)
        return result

    def to_json(self) -> Dict[str, Any]:
        data = self.model_dump()
        return {key: list(value) if isinstance(value, tuple) else value for key, value in data.items()}


class _WindowSpec(_SpecBase):
    window: Tuple[int, int, int]

    @field_validator("window")
    @classmethod
    def _positive(cls, value):
        if any(v < 1 for v in value):
            raise ValueError(f"window components must be positive, got {value}")
        return value

    @property
    def window_dims(self) -> Dims3:
        return Dims3.of(self.window)

    @property
    def label(self) -> str:
        return f"{self.family} w=({','.join(str(v) for v in self.window)})"


class FullSpec(_SpecBase):
    family: Literal["full"] = "full"

    @property
    def label(self) -> str:
        return "full"


class STASpec(_WindowSpec):
    family: Literal["sta"] = "sta"

    def check(self, grid: VideoGrid) -> None:
        predicates.check_sta_window(grid, self.window_dims)

    def axis_mask(self, axis, q, k, grid):
        return predicates.sta_axis(
            q, k, grid.dims.as_tuple()[axis], grid.tile.as_tuple()[axis], self.window[axis]
        )


class NATTENSpec(_WindowSpec):
    family: Literal["natten"] = "natten"
    ordering: ClassVar[str] = "zigzag"

    def check(self, grid: VideoGrid) -> None:
        predicates.check_natten_window(grid.dims, self.window_dims)

    def axis_mask(self, axis, q, k, grid):
        return predicates.natten_axis(q, k, grid.dims.as_tuple()[axis], self.window[axis])


class TiledNATTENSpec(NATTENSpec):
    family: Literal["tiled_natten"] = "tiled_natten"
    ordering: ClassVar[str] = "tile"


class SwinSpec(_WindowSpec):
    family: Literal["swin"] = "swin"
    shifted: bool = False

    def check(self, grid: VideoGrid) -> None:
        predicates.check_swin_window(grid.dims, self.window_dims)

    def axis_mask(self, axis, q, k, grid):
        return predicates.swin_axis(
            q, k, grid.dims.as_tuple()[axis], self.window[axis], self.shifted
        )

    def with_shift(self, shifted: bool) -> "SwinSpec":
        return self.model_copy(update={"shifted": shifted})

    @property
    def label(self) -> str:
        return super().label + (" shifted" if self.shifted else "")


class CLEARSpec(_SpecBase):
    family: Literal["clear"] = "clear"
    radius: float
    separable: ClassVar[bool] = False

    @field_validator("radius")
    @classmethod
    def _positive(cls, value):
        if not value > 0:
            raise ValueError(f"radius must be > 0, got {value}")
        return value

    def token_mask(self, q, k, grid):
        return predicates.clear_mask(q, k, self.radius)

    @property
    def label(self) -> str:
        return f"clear r={self.radius:g}"


MaskSpec = Annotated[
    Union[FullSpec, STASpec, NATTENSpec, TiledNATTENSpec, SwinSpec, CLEARSpec],
    Field(discriminator="family"),
]

_ADAPTER = TypeAdapter(MaskSpec)
_LIST_ADAPTER = TypeAdapter(List[MaskSpec])


def parse_mask_spec(data: Any) -> MaskSpec:
    """Validate a MaskSpec document (dict or JSON string)"""
    try:
        if isinstance(data, (str, bytes)):
            return _ADAPTER.validate_json(data)
        return _ADAPTER.validate_python(data)
    except ValidationError as e:
        raise ConfigValidationError(f"invalid mask spec: {_first_error(e)}")


def parse_mask_specs(data: Any) -> List[MaskSpec]:
    try:
        if isinstance(data, (str, bytes)):
            return _LIST_ADAPTER.validate_json(data)
        return _LIST_ADAPTER.validate_python(data)
    except ValidationError as e:
        raise ConfigValidationError(f"invalid pattern list: {_first_error(e)}")


def _first_error(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first.get("loc", ()))
    return f"{location}: {first.get('msg')}" if location else first.get("msg", str(error))

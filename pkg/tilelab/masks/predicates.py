"""
Token-level mask predicates for each attention family

Every predicate broadcasts over numpy coordinate arrays whose last axis is
(t, h, w); called with two TokenCoord values it returns a plain bool. The
per-axis helpers are what makes a family separable: the full predicate is the
conjunction of one test per axis.
"""
from typing import Union

import numpy as np

from tilelab.errors import ConfigValidationError
from tilelab.grid.video_grid import AXES, Dims3, TokenCoord, VideoGrid

CoordLike = Union[TokenCoord, np.ndarray]


def natten_axis(q, k, extent: int, window: int):
    half = (window - 1) // 2
    center = np.clip(q, half, extent - 1 - half)
    return np.abs(center - k) <= half


def sta_axis(q, k, extent: int, tile: int, window: int):
    half = (window // tile - 1) // 2
    tiles = extent // tile
    center = np.clip(q // tile, half, tiles - 1 - half)
    return np.abs(center - k // tile) <= half


def swin_axis(q, k, extent: int, window: int, shifted: bool):
    shift = window // 2 if shifted else 0
    return ((q - shift) % extent) // window == ((k - shift) % extent) // window


def check_natten_window(dims: Dims3, window: Dims3) -> None:
    for axis, extent, size in zip(AXES, dims, window):
        if size % 2 == 0:
            raise ConfigValidationError(f"NATTEN window.{axis}={size} must be odd")
        if size > extent:
            raise ConfigValidationError(f"window.{axis}={size} exceeds dims.{axis}={extent}")


def check_sta_window(grid: VideoGrid, window: Dims3) -> None:
    for axis, extent, tile, size in zip(AXES, grid.dims, grid.tile, window):
        if size % tile != 0:
            raise ConfigValidationError(
                f"STA window.{axis}={size} is not a multiple of tile.{axis}={tile}"
            )
        if (size // tile) % 2 == 0:
            raise ConfigValidationError(
                f"STA window.{axis}/tile.{axis}={size // tile} must be odd"
            )
        if size > extent:
            raise ConfigValidationError(f"window.{axis}={size} exceeds dims.{axis}={extent}")


def check_swin_window(dims: Dims3, window: Dims3) -> None:
    for axis, extent, size in zip(AXES, dims, window):
        if extent % size != 0:
            raise ConfigValidationError(
                f"Swin window.{axis}={size} does not divide dims.{axis}={extent}"
            )


def natten_mask(q: CoordLike, k: CoordLike, dims: Dims3, window: Dims3):
    """Neighborhood attention with the window center clamped inside the grid"""
    check_natten_window(dims, window)
    qa, ka = _coords(q), _coords(k)
    result = np.ones(np.broadcast_shapes(qa.shape[:-1], ka.shape[:-1]), dtype=bool)
    for a in range(3):
        result &= natten_axis(qa[..., a], ka[..., a], dims.as_tuple()[a], window.as_tuple()[a])
    return _result(result, q, k)


def sta_mask(q: CoordLike, k: CoordLike, grid: VideoGrid, window: Dims3):
    """Sliding tile attention: the window slides tile by tile"""
    check_sta_window(grid, window)
    qa, ka = _coords(q), _coords(k)
    result = np.ones(np.broadcast_shapes(qa.shape[:-1], ka.shape[:-1]), dtype=bool)
    for a in range(3):
        result &= sta_axis(
            qa[..., a], ka[..., a],
            grid.dims.as_tuple()[a], grid.tile.as_tuple()[a], window.as_tuple()[a],
        )
    return _result(result, q, k)


def swin_mask(q: CoordLike, k: CoordLike, dims: Dims3, window: Dims3, shifted: bool = False):
    """Same non-overlapping window cell, optionally with cyclically shifted cells"""
    check_swin_window(dims, window)
    qa, ka = _coords(q), _coords(k)
    result = np.ones(np.broadcast_shapes(qa.shape[:-1], ka.shape[:-1]), dtype=bool)
    for a in range(3):
        result &= swin_axis(
            qa[..., a], ka[..., a], dims.as_tuple()[a], window.as_tuple()[a], shifted
        )
    return _result(result, q, k)


def clear_mask(q: CoordLike, k: CoordLike, radius: float):
    """Euclidean distance between token coordinates within radius"""
    qa, ka = _coords(q), _coords(k)
    diff = (qa - ka).astype(np.float64)
    result = np.einsum("...i,...i->...", diff, diff) <= float(radius) ** 2
    return _result(result, q, k)


def _coords(c: CoordLike) -> np.ndarray:
    if isinstance(c, TokenCoord):
        return np.array(c.as_tuple(), dtype=np.int64)
    return np.asarray(c, dtype=np.int64)


def _result(result: np.ndarray, q: CoordLike, k: CoordLike):
    if isinstance(q, TokenCoord) and isinstance(k, TokenCoord):
        return bool(result)
    return result

"""
Zigzag and tile-major sequence flattening

Both orderings are t-major, then h, then w. Tile order applies that rule
twice: across tiles of the tile grid, then within a tile, so the B tokens of
one tile occupy B consecutive sequence indices.
"""
import logging
from functools import lru_cache

import numpy as np

from tilelab.errors import ConfigValidationError
from tilelab.grid.video_grid import Dims3, TokenCoord, VideoGrid

logger = logging.getLogger(__name__)

ORDERINGS = ("tile", "zigzag")


def _tile_index(t, h, w, grid: VideoGrid):
    tt, th, tw = grid.tile
    gt, gh, gw = grid.tile_grid
    tile_id = ((t // tt) * gh + (h // th)) * gw + (w // tw)
    intra_id = ((t % tt) * th + (h % th)) * tw + (w % tw)
    return tile_id * grid.block_size + intra_id


def tile_flatten(coord: TokenCoord, grid: VideoGrid) -> int:
    """Sequence index of a token under tile-major ordering"""
    coord.check_bounds(grid.dims)
    return int(_tile_index(coord.t, coord.h, coord.w, grid))


def tile_unflatten(index: int, grid: VideoGrid) -> TokenCoord:
    """Inverse of tile_flatten"""
    if index < 0 or index >= grid.num_tokens:
        raise ConfigValidationError(
            f"sequence index {index} out of range [0, {grid.num_tokens})"
        )
    tt, th, tw = grid.tile
    _, gh, gw = grid.tile_grid
    tile_id, intra_id = divmod(int(index), grid.block_size)
    tile_t, rest = divmod(tile_id, gh * gw)
    tile_h, tile_w = divmod(rest, gw)
    in_t, rest = divmod(intra_id, th * tw)
    in_h, in_w = divmod(rest, tw)
    return TokenCoord(tile_t * tt + in_t, tile_h * th + in_h, tile_w * tw + in_w)


def zigzag_flatten(coord: TokenCoord, dims: Dims3) -> int:
    """Row-major index t*(L_h*L_w) + h*L_w + w"""
    coord.check_bounds(dims)
    return (coord.t * dims.h + coord.h) * dims.w + coord.w


@lru_cache(maxsize=32)
def _zigzag_coords(dims: Dims3) -> np.ndarray:
    coords = np.indices(dims.as_tuple(), dtype=np.int64).reshape(3, -1).T
    coords.flags.writeable = False
    return coords


@lru_cache(maxsize=32)
def _permutation(grid: VideoGrid) -> np.ndarray:
    coords = _zigzag_coords(grid.dims)
    perm = _tile_index(coords[:, 0], coords[:, 1], coords[:, 2], grid).astype(np.int64)
    perm.flags.writeable = False
    logger.debug(f"Built tile permutation for {grid}")
    return perm


def tile_permutation(grid: VideoGrid) -> np.ndarray:
    """perm[zigzag index] = tile-order index, as a read-only int64 array"""
    return _permutation(grid)


def tile_permute(x: np.ndarray, grid: VideoGrid) -> np.ndarray:
    """Reorder rows of a zigzag-ordered (N, ...) array into tile order"""
    _check_rows(x, grid)
    out = np.empty_like(x)
    out[_permutation(grid)] = x
    return out


def tile_unpermute(x: np.ndarray, grid: VideoGrid) -> np.ndarray:
    """Reorder rows of a tile-ordered (N, ...) array back to zigzag order"""
    _check_rows(x, grid)
    return x[_permutation(grid)]


def sequence_coords(grid: VideoGrid, ordering: str = "tile") -> np.ndarray:
    """(N, 3) token coordinates listed in the given sequence order"""
    if ordering == "zigzag":
        return _zigzag_coords(grid.dims)
    if ordering == "tile":
        return _tile_coords(grid)
    raise ConfigValidationError(f"unknown ordering '{ordering}', expected one of {ORDERINGS}")


@lru_cache(maxsize=32)
def _tile_coords(grid: VideoGrid) -> np.ndarray:
    coords = np.empty((grid.num_tokens, 3), dtype=np.int64)
    coords[_permutation(grid)] = _zigzag_coords(grid.dims)
    coords.flags.writeable = False
    return coords


def _check_rows(x: np.ndarray, grid: VideoGrid) -> None:
    if x.shape[0] != grid.num_tokens:
        raise ConfigValidationError(
            f"array has {x.shape[0]} rows but grid {grid} has {grid.num_tokens} tokens"
        )


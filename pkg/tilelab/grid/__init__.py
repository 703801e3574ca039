"""
Token grid coordinates, tiling and sequence flattening
"""
from tilelab.grid.video_grid import AXES, Dims3, TokenCoord, VideoGrid
from tilelab.grid.flatten import (
    ORDERINGS,
    sequence_coords,
    tile_flatten,
    tile_permutation,
    tile_permute,
    tile_unflatten,
    tile_unpermute,
    zigzag_flatten,
)

__all__ = [
    "AXES",
    "Dims3",
    "TokenCoord",
    "VideoGrid",
    "ORDERINGS",
    "sequence_coords",
    "tile_flatten",
    "tile_permutation",
    "tile_permute",
    "tile_unflatten",
    "tile_unpermute",
    "zigzag_flatten",
]

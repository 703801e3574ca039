"""
Mask predicate over sequence indices in a family's ordering
"""
from functools import cached_property
from typing import Optional

import numpy as np

from tilelab.grid.flatten import sequence_coords
from tilelab.grid.video_grid import VideoGrid
from tilelab.masks.families import MaskSpec


class TokenMask:
    """Callable mask(q_index, k_index) -> bool array, broadcasting like numpy"""

    def __init__(self, spec: MaskSpec, grid: VideoGrid, ordering: Optional[str] = None):
        spec.check(grid)
        self.spec = spec
        self.grid = grid
        self.ordering = ordering or spec.ordering

    @cached_property
    def coords(self) -> np.ndarray:
        return sequence_coords(self.grid, self.ordering)

    def __call__(self, q_index, k_index) -> np.ndarray:
        q = self.coords[np.asarray(q_index)]
        k = self.coords[np.asarray(k_index)]
        return self.spec.token_mask(q, k, self.grid)

    def row(self, q_index: int) -> np.ndarray:
        """Allowed keys of one query as an (N,) bool array"""
        return self.spec.token_mask(self.coords[q_index][None, :], self.coords, self.grid)

    def dense(self) -> np.ndarray:
        """Full (N, N) bool matrix; only sensible for small grids"""
        return self.spec.token_mask(self.coords[:, None, :], self.coords[None, :, :], self.grid)

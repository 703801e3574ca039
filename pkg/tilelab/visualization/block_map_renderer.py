"""
Render a BlockMap as a binary PGM image, one pixel per block
"""
import logging
from pathlib import Path
from typing import Dict, Union

import numpy as np
from PIL import Image

from tilelab.errors import StorageError
from tilelab.masks.block_map import BlockMap, BlockType


class BlockMapRenderer:
    def __init__(self):
        self.gray_levels: Dict[BlockType, int] = {
            BlockType.DENSE: 0,
            BlockType.MIXED: 128,
            BlockType.EMPTY: 255,
        }
        self.logger = logging.getLogger(__name__)

    def to_pixels(self, block_map: BlockMap) -> np.ndarray:
        lookup = np.zeros(len(BlockType), dtype=np.uint8)
        for block_type, level in self.gray_levels.items():
            lookup[block_type] = level
        return lookup[block_map.types]

    def render(self, block_map: BlockMap, path: Union[str, Path]) -> Path:
        """Write a P5 PGM; rows are query blocks, columns key blocks"""
        path = Path(path)
        image = Image.fromarray(self.to_pixels(block_map))
        try:
            image.save(path, format="PPM")
        except OSError as e:
            raise StorageError(f"cannot write {path}: {e.strerror or e}")
        self.logger.info(f"Rendered {block_map.num_blocks}x{block_map.num_blocks} block map to {path}")
        return path

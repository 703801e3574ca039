"""
SlidingTileLab: sliding tile attention masks, block sparsity analysis and
block-sparse attention at desk scale
"""
__version__ = "1.0.0"

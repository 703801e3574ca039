"""
Tensor files and reproducible random streams
"""
from tilelab.data.prng import PRNG_NAME, make_rng, standard_normal
from tilelab.data.tensor_store import TensorStore, read_tensor, write_tensor

__all__ = ["PRNG_NAME", "make_rng", "standard_normal", "TensorStore", "read_tensor", "write_tensor"]

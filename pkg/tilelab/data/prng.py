"""
Reproducible random streams

Every stream is numpy's Philox4x64-10 counter-based bit generator keyed by a
SeedSequence of (seed, *stream ids); normals come from Generator.standard_normal
(ziggurat). The pair is published as PRNG_NAME so files can record it.
"""
import numpy as np

PRNG_NAME = "philox4x64-10/numpy-ziggurat v1"


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def standard_normal(seed: int, shape, *stream: int, dtype=np.float64) -> np.ndarray:
    return make_rng(seed, *stream).standard_normal(shape, dtype=dtype)

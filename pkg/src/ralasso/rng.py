"""Seeded random streams.

Every stream is a Philox (counter-based) generator keyed by the run seed and
a tuple of labels, so replications, validation sets and folds each get an
independent stream regardless of evaluation order or worker count.
"""

import zlib

import numpy as np

RNG_NAME = "numpy.random.Philox"


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def make_rng(seed, *labels) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(_key(x) for x in labels))
    return np.random.Generator(np.random.Philox(ss))

"""Seeded random streams.

Every consumer draws from its own stream derived from the run seed, so adding
draws in one place (say, the initialiser) never shifts the measurements or the
noise. Streams are numpy ``PCG64`` generators keyed by ``SeedSequence(seed,
spawn_key=(purpose,))``; both algorithms are published and fixed across numpy
releases, which is what makes ensembles reproducible.
"""

import numpy as np

PRNG_ALGORITHM = "numpy.PCG64+SeedSequence(spawn_key=purpose)"

PURPOSES = {
    "truth": 1,
    "ensemble": 2,
    "noise": 3,
    "init": 4,
    "perturb": 5,
}


def stream(seed, purpose):
    """Return the generator for ``purpose`` under the 64-bit ``seed``."""
    if purpose not in PURPOSES:
        raise KeyError(f"unknown stream purpose {purpose!r}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in 64 unsigned bits")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(PURPOSES[purpose],))))

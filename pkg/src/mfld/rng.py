"""Counter-based random streams.

Every source of randomness in a run is a pure function of
``(seed, purpose tag, counters...)``, realised as a Philox generator keyed
through a SeedSequence.  Streams are therefore reproducible independently of
execution order or worker count, and any single iteration of a run can be
re-derived in isolation.
"""

import numpy as np

# Purpose tags.  Keep values stable: they are part of run reproducibility.
NOISE = 0  # Langevin noise injection
THIN = 1  # coreset selection / batch partitioning
INIT = 2  # particle initialisation
DATA = 3  # fresh data batches drawn inside drift models
MODEL = 4  # model construction (teacher networks, test sets)
RISK = 5  # fixed evaluation subsamples
BENCH = 6  # standalone benchmarks

_MASK = (1 << 64) - 1


def stream(seed: int, tag: int, *counters: int) -> np.random.Generator:
    """Return the generator for (seed, tag, counters...)."""
    entropy = [int(seed) & _MASK, int(tag)] + [int(c) & _MASK for c in counters]
    return np.random.Generator(np.random.Philox(seed=np.random.SeedSequence(entropy)))

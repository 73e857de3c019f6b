"""Deterministic random stream derivation.

All randomness in the package flows through Philox, a counter-based 64-bit
generator.  Substreams are derived by hashing an integer path
(seed, replication, dataset, purpose) through ``numpy``'s SeedSequence, so
any stream can be reconstructed in isolation: results never depend on the
order in which streams are consumed or on how work is split across workers.
"""

import numpy as np

# purpose tags for substream derivation
BASE_GRAPH = 0
PRUNE = 1
EDGE_VALUES = 2
SAMPLE = 3
SPLIT = 4


def substream(seed, *path):
    """Return a Generator for the substream identified by (seed, *path).

    ``seed`` and every path component must be non-negative integers.
    """
    entropy = (int(seed),) + tuple(int(x) for x in path)
    if any(x < 0 for x in entropy):
        raise ValueError("stream path components must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

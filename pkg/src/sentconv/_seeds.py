"""Sub-seed derivation so independent random streams never overlap.

Every source of randomness (fold assignment, dev split, embedding init,
parameter init, dropout, batch shuffling) draws from its own stream,
derived from the single user-facing seed plus a stream tag.  Fold
assignment and all initialization streams are tagged without the fold
index, so they are identical across folds and across model variants.
"""

import numpy as np

FOLDS = 11
DEV_SPLIT = 12
UNKNOWN_INIT = 13
RAND_MATRIX = 14
PARAMS = 15
DROPOUT = 16
SHUFFLE = 17


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministically mix `seed` with stream tags into a fresh seed."""
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1)[0])

"""Counter-based seed derivation.

A child seed depends only on the master seed and its key path, so adding
trials never reshuffles the seeds of earlier ones.
"""

import numpy as np


def derive_seed(master: int, *keys: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint32)[0])

"""Counter-based RNG substreams.

Every random stream is addressed by ``(master_seed, *key)`` through
``numpy.random.SeedSequence`` spawn keys, so a stream never depends on which
other streams were drawn before it or on the thread that draws it.
"""

import numpy as np

# trailing key components that separate stream families
PANEL = 0
BOOTSTRAP = 1
FROZEN_UNITS = 2

_MASK64 = (1 << 64) - 1


def float_key(x):
    """Stable integer key for a float (bit pattern, -0.0 folded into 0.0)."""
    return int(np.float64(float(x) + 0.0).view(np.uint64))


def seed_sequence(master_seed, *key):
    if master_seed < 0 or master_seed > _MASK64:
        raise ValueError("master_seed must be a 64-bit unsigned integer")
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))


def substream(master_seed, *key):
    """Independent ``Generator`` for the stream addressed by ``key``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master_seed, *key)))


def substreams(master_seed, n, *key):
    """``n`` mutually independent generators under one key."""
    children = seed_sequence(master_seed, *key).spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]

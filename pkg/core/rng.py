"""
Seeded random streams and stable hashing.

All randomness in the pipeline is drawn from numpy Generators built here, so a
(seed, key...) tuple always yields the same stream regardless of the order in
which streams are requested.
"""

import numpy as np

FNV64_OFFSET = 0xcbf29ce484222325
FNV64_PRIME = 0x100000001b3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data):
    """64-bit FNV-1a hash of bytes (str is UTF-8 encoded)."""
    if isinstance(data, str):
        data = data.encode('utf-8')
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def _key_entropy(key):
    if isinstance(key, (int, np.integer)):
        return int(key) & _MASK64
    return fnv1a64(str(key))


def stream(seed, *keys):
    """
    Independent Generator for (seed, *keys).

    Args:
        seed: 64-bit run seed
        keys: ints or strings identifying the sub-stream (sample index, plot id...)

    Returns:
        numpy.random.Generator
    """
    entropy = [int(seed) & _MASK64] + [_key_entropy(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def in_holdout(identifier, fraction=0.2):
    """Deterministic train/validation assignment by identifier hash."""
    return (fnv1a64(str(identifier)) % 10_000) < int(round(fraction * 10_000))


def split_holdout(identifiers, fraction=0.2):
    """
    Split identifiers into (train, holdout) lists by hash.

    Both sides are non-empty when at least two identifiers are given.
    """
    identifiers = list(identifiers)
    train = [i for i in identifiers if not in_holdout(i, fraction)]
    holdout = [i for i in identifiers if in_holdout(i, fraction)]
    if not holdout and len(train) > 1:
        # lowest hash goes to holdout so the choice stays seed-free
        pick = min(train, key=lambda i: fnv1a64(str(i)))
        train.remove(pick)
        holdout.append(pick)
    elif not train and len(holdout) > 1:
        pick = max(holdout, key=lambda i: fnv1a64(str(i)))
        holdout.remove(pick)
        train.append(pick)
    return train, holdout

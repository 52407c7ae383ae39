"""Deterministic sub-seed derivation.

Every random draw in the simulator comes from a generator created here, keyed
by (master seed, purpose tag, index).  Results are therefore reproducible
regardless of evaluation order, trial batching, or worker count.
"""

import hashlib

import numpy as np


def _tag_key(tag: str) -> int:
    return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "little")


def derive_rng(master_seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Generator for one purpose (``tag``) and one trial/drop (``index``)."""
    ss = np.random.SeedSequence(entropy=(int(master_seed), _tag_key(tag), int(index)))
    return np.random.default_rng(ss)

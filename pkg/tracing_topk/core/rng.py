# tracing_topk/core/rng.py
"""
Seeded random streams.

Every stream is a Philox (counter-based) generator keyed by a numpy SeedSequence.
Per-trial streams are children keyed by (master_seed, trial_index, purpose), so a
trial draws the same numbers no matter which worker runs it or in what order.
"""
import hashlib
from typing import Dict

import numpy as np

SEED_MASK = (1 << 64) - 1

_TAG_CACHE: Dict[str, int] = {}


def purpose_tag(purpose: str) -> int:
    """Stable 64-bit integer for a purpose label like "data" or "target"."""
    tag = _TAG_CACHE.get(purpose)
    if tag is None:
        digest = hashlib.blake2b(purpose.encode("utf-8"), digest_size=8).digest()
        tag = int.from_bytes(digest, "little")
        _TAG_CACHE[purpose] = tag
    return tag


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed & SEED_MASK)))


def trial_stream(master_seed: int, trial_index: int, purpose: str) -> np.random.Generator:
    seq = np.random.SeedSequence(
        entropy=master_seed & SEED_MASK,
        spawn_key=(trial_index, purpose_tag(purpose)),
    )
    return np.random.Generator(np.random.Philox(seq))


def child_seed(master_seed: int, trial_index: int, purpose: str) -> int:
    """64-bit seed for APIs that take an integer seed instead of a Generator."""
    seq = np.random.SeedSequence(
        entropy=master_seed & SEED_MASK,
        spawn_key=(trial_index, purpose_tag(purpose)),
    )
    return int(seq.generate_state(1, dtype=np.uint64)[0])

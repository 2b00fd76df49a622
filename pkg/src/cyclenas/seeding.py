"""Deterministic random streams derived from a single root seed."""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(seed: int, *labels: object) -> np.random.Generator:
    """Return an independent generator for (seed, labels).

    Streams use the counter-based Philox engine keyed by the root seed and a
    hash of the consumer label, so each consumer sees a stable sequence no
    matter in which order the streams are created.
    """
    label = ".".join(str(x) for x in labels)
    key = np.array([seed & _MASK64, _label_key(label)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))

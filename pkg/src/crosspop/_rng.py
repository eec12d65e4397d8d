"""Deterministic, counter-style random stream derivation.

Child streams are keyed by (seed, *labels) through SHA-256, so a stream's
identity depends only on its labels, never on the order in which streams are
created or on which worker creates them.  This is what makes replications and
fold permutations reproducible under any scheduling.
"""

import hashlib

import numpy as np


def _key_bytes(seed: int, keys: tuple) -> bytes:
    parts = [b"crosspop", str(int(seed)).encode()]
    for k in keys:
        parts.append(repr(k).encode())
    return b"\x1f".join(parts)


def child_seed(seed: int, *keys) -> int:
    """Derive a 64-bit child seed from a root seed and a label tuple."""
    digest = hashlib.sha256(_key_bytes(seed, keys)).digest()
    return int.from_bytes(digest[:8], "little")


def child_rng(seed: int, *keys) -> np.random.Generator:
    """Generator whose stream is a pure function of (seed, *keys)."""
    digest = hashlib.sha256(_key_bytes(seed, keys)).digest()
    words = np.frombuffer(digest, dtype=np.uint32)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words.tolist())))

"""Counter-based random number streams.

Every stochastic operation in the package draws from a stream derived from a
master seed plus a path of labels/indices. Streams are Philox-backed, so the
same (seed, path) always yields the same draws regardless of how many other
streams exist or which worker evaluates them.
"""

import hashlib

import numpy as np

__all__ = ["stream", "stream_key"]


def stream_key(master_seed: int, *path) -> int:
    """Derive a 128-bit Philox key from a master seed and a label path."""
    tag = repr((int(master_seed),) + tuple(path)).encode()
    digest = hashlib.sha256(tag).digest()
    return int.from_bytes(digest[:16], "little")


def stream(master_seed: int, *path) -> np.random.Generator:
    """Independent generator for (master_seed, *path).

    Path elements may be strings or integers; they are folded into the Philox
    key, so streams never overlap and never depend on creation order.
    """
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, *path)))

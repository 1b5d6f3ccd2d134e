"""Counter-based random streams and ordered block execution.

Every stream is a Philox generator whose key is derived from the user seed
and a tuple of integer indices (block, side, chunk, ...).  Distinct index
tuples give distinct keys, so streams never overlap and results do not
depend on how blocks are scheduled across workers.
"""

from __future__ import annotations

import hashlib
import os
import struct
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ALGORITHM = f"philox4x64/ziggurat numpy-{np.__version__}"

_MASK64 = (1 << 64) - 1


def stream_key(seed: int, *index: int) -> np.ndarray:
    digest = hashlib.blake2b(struct.pack(f"<{len(index)}q", *index), digest_size=8).digest()
    return np.array([int(seed) & _MASK64, int.from_bytes(digest, "little")], dtype=np.uint64)


def stream(seed: int, *index: int) -> np.random.Generator:
    """Generator for the sub-stream ``(seed, *index)``."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *index)))


def seed_info(seed: int, *index: int) -> str:
    return f"{ALGORITHM} seed={seed} stream={index}"


def worker_count() -> int:
    env = os.environ.get("FBMRUIN_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def map_blocks(fn, n_blocks: int, threads: int | None = None) -> list:
    """Evaluate ``fn(b)`` for ``b in range(n_blocks)`` and return results in block order."""
    threads = threads or worker_count()
    if threads == 1 or n_blocks <= 1:
        return [fn(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_blocks)))


def split(total: int, n_blocks: int) -> list[int]:
    """Block sizes summing to ``total``; the first ``total % n_blocks`` get one extra."""
    base, extra = divmod(total, n_blocks)
    return [base + (1 if b < extra else 0) for b in range(n_blocks)]

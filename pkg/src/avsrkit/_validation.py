"""Input validation helpers, in the spirit of sklearn's check_* utilities."""
from __future__ import annotations

import numpy as np


def as_float_matrix(x, name: str = "array") -> np.ndarray:
    """Coerce to a C-contiguous float64 2-D array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def check_rng(seed_or_rng) -> np.random.Generator:
    """Accept a seed, a Generator, or None (fresh entropy)."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def check_token_ids(tokens, vocab_size: int, *, forbid: tuple[int, ...] = ()) -> list[int]:
    """Validate a token id sequence against the vocabulary size."""
    ids = [int(t) for t in tokens]
    for t in ids:
        if not 0 <= t < vocab_size:
            raise ValueError(f"token id {t} outside vocabulary of size {vocab_size}")
        if t in forbid:
            raise ValueError(f"token id {t} is not allowed here")
    return ids


def derive_seed(root_seed: int, *names) -> int:
    """Stable per-item seed derived from a root seed and string labels.

    Uses SHA-256 so parallel fan-out over items never depends on order.
    """
    import hashlib

    key = ":".join([str(int(root_seed))] + [str(n) for n in names])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")

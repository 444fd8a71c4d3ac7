"""Small shared helpers: deterministic RNG streams and config hashing."""
from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np


def rng_for(seed: int, *tags) -> np.random.Generator:
    """Independent generator keyed by (seed, tags).

    The key is hashed with sha256, not Python's randomized hash(), so streams
    are stable across processes and platforms. Deriving every random draw from
    (seed, purpose, epoch, index) keys makes training trajectories reproducible
    and resumable: epoch k consumes the same randomness no matter what ran
    before it.
    """
    digest = hashlib.sha256(repr((int(seed),) + tags).encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def stable_hash(doc: Any) -> str:
    """Short hex digest of a JSON-serializable document."""
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()[:12]

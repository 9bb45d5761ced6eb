"""Stable seed derivation for deterministic, order-independent randomness."""

from __future__ import annotations

import hashlib
import random


def derive_seed(*parts: object) -> int:
    """Map a key tuple to a 64-bit seed via sha256; stable across runs and platforms."""
    key = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(*parts: object) -> random.Random:
    return random.Random(derive_seed(*parts))

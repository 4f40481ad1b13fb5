"""Deterministic seed derivation.

Every random stream in the package is derived from a single root seed and a
purpose string, so that one integer in a config reproduces a whole run.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root: int, purpose: str) -> int:
    """Derive a child seed from (root, purpose) via SHA-256.

    The mapping is fixed: two processes with the same root and purpose string
    always obtain the same child seed.
    """
    digest = hashlib.sha256(f"{int(root)}:{purpose}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(root: int, purpose: str) -> np.random.Generator:
    """A numpy Generator seeded by derive_seed(root, purpose)."""
    return np.random.default_rng(derive_seed(root, purpose))

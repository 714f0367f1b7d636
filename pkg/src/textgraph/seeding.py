"""Deterministic seed derivation: every random stream hangs off one root seed
through (root, purpose tag, index) hashing."""

from __future__ import annotations

import hashlib


def derive_seed(root: int, tag: str, index: int = 0) -> int:
    digest = hashlib.sha256(f"{root}:{tag}:{index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")

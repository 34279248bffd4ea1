"""Shared helpers: deterministic seed derivation and fresh-name allocation."""

import hashlib


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit seed derived from a master seed and arbitrary tags."""
    text = "\x1f".join([str(master), *map(str, parts)])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def stable_hash(*parts) -> str:
    """Short content hash, stable across runs and platforms."""
    text = "\x1f".join(map(str, parts))
    return hashlib.sha1(text.encode()).hexdigest()[:16]


def fresh_name(base: str, used: set) -> str:
    """Pick a net name derived from `base` that is not in `used`; reserves it."""
    name = base
    k = 1
    while name in used:
        name = f"{base}_{k}"
        k += 1
    used.add(name)
    return name

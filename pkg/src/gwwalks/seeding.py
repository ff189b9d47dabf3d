"""Seed derivation.

Every random stream in the package is keyed by a tuple hashed together with
the master seed, so results never depend on the order in which work is
scheduled.
"""

from __future__ import annotations

import hashlib
import random

MASK64 = (1 << 64) - 1


def derive_seed(master: int, *keys: int | str) -> int:
    """Return a 64-bit seed that is a pure function of ``(master, *keys)``."""
    h = hashlib.blake2b(digest_size=8, person=b"gwwalks-seed")
    h.update(str(int(master) & MASK64).encode())
    for key in keys:
        h.update(b"\x1f")
        h.update(str(key).encode())
    return int.from_bytes(h.digest(), "little")


def stream(master: int, *keys: int | str) -> random.Random:
    """A ``random.Random`` seeded from :func:`derive_seed`."""
    return random.Random(derive_seed(master, *keys))


def splitmix64(x: int) -> int:
    """One round of the splitmix64 finaliser."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def child_hash(parent_hash: int, index: int) -> int:
    """Hash of the ``index``-th child given its parent's hash."""
    return splitmix64(parent_hash ^ splitmix64(index + 1))


def to_unit(h: int) -> float:
    """Map a 64-bit hash to a float in [0, 1) using its top 53 bits."""
    return (h >> 11) * (1.0 / (1 << 53))

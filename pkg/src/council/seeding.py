"""Deterministic seed derivation.

Python's builtin ``hash`` is salted per process, so anything that must
reproduce across runs derives its randomness through a keyed digest instead.
Deriving from string parts also decouples consumers: two call sites with
different keys can never share or steal a random stream.
"""

from __future__ import annotations

import hashlib
import random


def derived_seed(*parts: object) -> int:
    key = "|".join(str(p) for p in parts)
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def derived_rng(*parts: object) -> random.Random:
    return random.Random(derived_seed(*parts))

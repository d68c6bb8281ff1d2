"""Deterministic seed derivation shared by every randomized stage.

Derived seeds are a pure function of their parts, so adding a new stage
(with a new stage name) never perturbs the randomness of existing ones.

The recipe is fixed and documented so results can be reproduced outside
this package: each part is rendered with ``str()``, UTF-8 encoded, and
fed length-prefixed (4-byte big-endian length, then the bytes) into
BLAKE2b with an 8-byte digest; the digest is read as an unsigned
big-endian 64-bit integer.
"""

from __future__ import annotations

import hashlib


def derive_seed(*parts: object) -> int:
    """Map an ordered tuple of parts to a stable 64-bit unsigned seed."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        data = str(part).encode("utf-8")
        h.update(len(data).to_bytes(4, "big"))
        h.update(data)
    return int.from_bytes(h.digest(), "big")

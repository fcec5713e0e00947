"""Deterministic seed derivation.

Every random draw in a run flows from the master seed through sha256 over a
labelled path (e.g. master -> run index -> "split" -> client id), so runs are
reproducible and the derivation is platform-independent and citable.
"""

import hashlib


def derive_seed(*parts) -> int:
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")

"""Canonical JSON: the one serialization used for digests and reports.

Sorted keys, no whitespace, ASCII-only. Two equal documents always yield
the same bytes, which is what makes report digests and fingerprints
comparable across runs.
"""

from __future__ import annotations

import hashlib
import json


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def fingerprint(obj) -> str:
    """Short stable hash of a document; used for component fingerprints."""
    return sha256_hex(canonical_json(obj))[:16]

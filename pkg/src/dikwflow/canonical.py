"""Canonical serialization and content hashing.

Topic identity and caching are content-addressed: two structurally equal
bodies must serialize to the same bytes on every platform. The canonical
form is UTF-8 JSON with lexicographically sorted keys, no insignificant
whitespace, shortest-round-trip floats, NFC-normalized strings with
collapsed internal whitespace, and lowercased enum tokens.

The digest algorithm is SHA-256, fixed for the whole repository and
recorded in artifact files as ``digest_algorithm``.
"""

from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from enum import Enum
from typing import Any

DIGEST_ALGORITHM = "sha256"

_WHITESPACE_RUN = re.compile(r"\s+")


class CanonicalizationError(ValueError):
    """Value cannot be rendered in canonical form (NaN, unsupported type, ...)."""


def normalize_string(s: str) -> str:
    """NFC-normalize, collapse whitespace runs to a single space, strip ends."""
    return _WHITESPACE_RUN.sub(" ", unicodedata.normalize("NFC", s)).strip()


def canonicalize(value: Any) -> Any:
    """Recursively rewrite a value into its canonical JSON-compatible form.

    dicts keep only canonicalized values (keys must be strings); sequences
    become lists; enums collapse to their lowercased token; strings are
    whitespace-normalized. Floats are passed through; ``json.dumps`` renders
    them with Python's shortest-round-trip repr.
    """
    if value is None or isinstance(value, bool):
        return value
    if isinstance(value, Enum):
        return str(value.value).lower()
    if isinstance(value, str):
        return normalize_string(value)
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise CanonicalizationError("non-finite float has no canonical form")
        return value
    if isinstance(value, dict):
        out = {}
        for key, item in value.items():
            if not isinstance(key, str):
                raise CanonicalizationError(f"non-string map key: {key!r}")
            out[key] = canonicalize(item)
        return out
    if isinstance(value, (list, tuple)):
        return [canonicalize(item) for item in value]
    if isinstance(value, (set, frozenset)):
        return sorted(canonicalize(item) for item in value)
    raise CanonicalizationError(f"unsupported type for canonical form: {type(value).__name__}")


def canonical_bytes(value: Any) -> bytes:
    """Canonical UTF-8 JSON encoding of ``value``."""
    return json.dumps(
        canonicalize(value),
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    ).encode("utf-8")


def digest_hex(value: Any) -> str:
    """SHA-256 hex digest of the canonical encoding of ``value``."""
    return hashlib.sha256(canonical_bytes(value)).hexdigest()


def digest_stream() -> "hashlib._Hash":
    """Fresh hasher for incremental digests (dataset fingerprinting)."""
    return hashlib.sha256()

"""Shared helpers: seed derivation, config hashing, stable number formatting."""

from __future__ import annotations

import hashlib


def derive_seed(*parts: object) -> int:
    """Derive a child RNG seed from heterogeneous parts.

    Stable across processes and platforms (unlike hash()), so any computation
    seeded through here is reproducible and schedule-independent.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def config_hash(canonical: str, length: int = 12) -> str:
    """Short hex digest used for results directory names."""
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:length]


def format_value(value: object) -> str:
    """Render a cell for TSV/CSV output.

    Floats use repr(), which round-trips exactly in Python 3; None becomes the
    literal NA token shared by the dataset and report formats.
    """
    if value is None:
        return "NA"
    if isinstance(value, float):
        return repr(value)
    return str(value)

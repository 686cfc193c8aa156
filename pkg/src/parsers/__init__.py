"""Parsers package utilities."""

from __future__ import annotations

import gzip
from pathlib import Path

NIFTI_MAGICS = (b"n+1\x00", b"ni1\x00")
GZIP_MAGIC = b"\x1f\x8b"


def _read_header_bytes(path: str | Path, size: int = 348) -> bytes:
    try:
        with open(path, "rb") as f:
            head = f.read(size)
        if head[:2] == GZIP_MAGIC:
            with gzip.open(path, "rb") as f:
                head = f.read(size)
        return head
    except (OSError, EOFError):
        return b""


def is_nifti(path: str | Path) -> bool:
    """True when the file carries a NIfTI-1 magic string at byte 344."""
    head = _read_header_bytes(path)
    return len(head) >= 348 and head[344:348] in NIFTI_MAGICS

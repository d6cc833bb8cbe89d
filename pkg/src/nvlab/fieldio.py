"""Binary field records and JSON manifests.

A field record is a little-endian header followed by the coefficient table:

    bytes 0..3    magic b"NVF1"
    int64         nx
    int64         ny
    float64       lx
    float64       ly
    complex128    nx * ny coefficients, row-major (x index slowest)

Manifests are small JSON documents listing every artifact with its SHA-256
checksum so that a directory of outputs can be validated later.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .spectral import GridSpec, SpectralField, is_hermitian

__all__ = [
    "MAGIC",
    "write_field",
    "read_field",
    "write_fields",
    "read_fields",
    "sha256_file",
    "config_hash",
    "write_manifest",
    "validate_manifest",
]

MAGIC = b"NVF1"
_HEADER = struct.Struct("<4sqqdd")


def _encode(F: SpectralField) -> bytes:
    g = F.grid
    head = _HEADER.pack(MAGIC, g.nx, g.ny, float(g.lx), float(g.ly))
    return head + np.ascontiguousarray(F.coeffs, dtype="<c16").tobytes()


def _decode(buf: bytes, offset: int = 0) -> tuple[SpectralField, int]:
    magic, nx, ny, lx, ly = _HEADER.unpack_from(buf, offset)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    offset += _HEADER.size
    n = nx * ny
    data = np.frombuffer(buf, dtype="<c16", count=n, offset=offset).reshape(nx, ny)
    grid = GridSpec(int(nx), int(ny), float(lx), float(ly))
    coeffs = data.astype(complex)
    return SpectralField(grid, coeffs, is_hermitian(coeffs)), offset + 16 * n


def write_field(path: str | Path, F: SpectralField) -> Path:
    """Write a single field record."""
    path = Path(path)
    path.write_bytes(_encode(F))
    return path


def read_field(path: str | Path) -> SpectralField:
    """Read a single field record; the realness flag is inferred."""
    F, _ = _decode(Path(path).read_bytes())
    return F


def write_fields(path: str | Path, fields: Iterable[SpectralField]) -> Path:
    """Write consecutive field records into one file."""
    path = Path(path)
    with path.open("wb") as fh:
        for F in fields:
            fh.write(_encode(F))
    return path


def read_fields(path: str | Path) -> list[SpectralField]:
    buf = Path(path).read_bytes()
    out, off = [], 0
    while off < len(buf):
        F, off = _decode(buf, off)
        out.append(F)
    return out


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: Mapping) -> str:
    """Stable hash of a configuration mapping (sorted JSON)."""
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(directory: str | Path, files: Iterable[str | Path], config: Mapping,
                   extra: Mapping | None = None, name: str = "manifest.json") -> Path:
    """Write a manifest naming the config hash and each file's checksum."""
    directory = Path(directory)
    entries = []
    for f in files:
        p = Path(f)
        # entries are stored by name, so files must live directly in the directory
        full = directory / p.name
        entries.append({"file": full.name, "sha256": sha256_file(full), "bytes": full.stat().st_size})
    doc = {
        "config": dict(config),
        "config_hash": config_hash(config),
        "files": entries,
    }
    if extra:
        doc.update(extra)
    out = directory / name
    out.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
    return out


def validate_manifest(path: str | Path) -> bool:
    """True when every listed file exists with a matching checksum."""
    path = Path(path)
    doc = json.loads(path.read_text())
    for entry in doc.get("files", []):
        f = path.parent / entry["file"]
        if not f.exists() or sha256_file(f) != entry["sha256"]:
            return False
    return doc.get("config_hash") == config_hash(doc.get("config", {}))

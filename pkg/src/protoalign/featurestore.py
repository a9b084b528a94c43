"""Bit-exact binary container for per-word representation vectors (PCFS).

File layout, little-endian:

    magic "PCFS" | u32 version=1 | u32 n_dim | u32 n_sentences
    per sentence: u32 n_tokens, then n_tokens * n_dim float32 values
    trailing u64 FNV-1a checksum of every preceding byte

A JSON manifest with provenance fields is written beside the store as
``<path>.manifest.json``. Vectors are float32 on disk; downstream numerics
promote to float64.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "FeatureStore",
    "Manifest",
    "write_store",
    "read_store",
    "get_sentence",
    "manifest_path",
    "fnv1a64",
    "StoreError",
    "BadMagicError",
    "VersionError",
    "ChecksumError",
    "TruncatedError",
    "ManifestError",
]

MAGIC = b"PCFS"
VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


class StoreError(Exception):
    """Base error for PCFS reading and writing."""


class BadMagicError(StoreError):
    pass


class VersionError(StoreError):
    pass


class ChecksumError(StoreError):
    pass


class TruncatedError(StoreError):
    pass


class ManifestError(StoreError):
    pass


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = _FNV_OFFSET
    prime = _FNV_PRIME
    mask = _MASK64
    for b in data:
        h = ((h ^ b) * prime) & mask
    return h


@dataclass
class Manifest:
    language: str
    model_name: str
    layer: int
    treebank_file: str
    n_sentences: int
    n_dim: int
    content_checksum: int
    pooling: str

    def to_json(self) -> str:
        doc = {
            "language": self.language,
            "model_name": self.model_name,
            "layer": self.layer,
            "treebank_file": self.treebank_file,
            "n_sentences": self.n_sentences,
            "n_dim": self.n_dim,
            # hex string: JSON numbers cannot hold u64 exactly everywhere
            "content_checksum": f"{self.content_checksum:016x}",
            "pooling": self.pooling,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "Manifest":
        doc = json.loads(text)
        try:
            return Manifest(
                language=doc["language"],
                model_name=doc["model_name"],
                layer=int(doc["layer"]),
                treebank_file=doc["treebank_file"],
                n_sentences=int(doc["n_sentences"]),
                n_dim=int(doc["n_dim"]),
                content_checksum=int(doc["content_checksum"], 16),
                pooling=doc["pooling"],
            )
        except (KeyError, ValueError) as exc:
            raise ManifestError(f"invalid manifest: {exc}") from exc


@dataclass
class FeatureStore:
    """Per-sentence (n_tokens x n_dim) float32 matrices plus manifest."""

    n_dim: int
    sentences: list[np.ndarray]
    manifest: Manifest

    def __post_init__(self):
        for i, s in enumerate(self.sentences):
            if s.ndim != 2 or s.shape[1] != self.n_dim:
                raise ValueError(
                    f"sentence {i} has shape {s.shape}, expected (*, {self.n_dim})")
        if self.manifest.n_sentences != len(self.sentences):
            raise ValueError("manifest.n_sentences does not match sentence count")
        if self.manifest.n_dim != self.n_dim:
            raise ValueError("manifest.n_dim does not match n_dim")

    @property
    def n_sentences(self) -> int:
        return len(self.sentences)

    def token_counts(self) -> list[int]:
        return [s.shape[0] for s in self.sentences]


def get_sentence(store: FeatureStore, index: int) -> np.ndarray:
    if not 0 <= index < store.n_sentences:
        raise IndexError(f"sentence index {index} out of range [0, {store.n_sentences})")
    return store.sentences[index]


def manifest_path(path) -> Path:
    return Path(str(path) + ".manifest.json")


def write_store(store: FeatureStore, path) -> None:
    """Serialize the store; sets the manifest checksum and writes both files."""
    parts = [MAGIC,
             struct.pack("<I", VERSION),
             struct.pack("<I", store.n_dim),
             struct.pack("<I", store.n_sentences)]
    for sent in store.sentences:
        arr = np.ascontiguousarray(sent, dtype="<f4")
        parts.append(struct.pack("<I", arr.shape[0]))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    checksum = fnv1a64(body)
    store.manifest.content_checksum = checksum
    with open(path, "wb") as f:
        f.write(body)
        f.write(struct.pack("<Q", checksum))
    with open(manifest_path(path), "w", encoding="utf-8") as f:
        f.write(store.manifest.to_json())


def read_store(path) -> FeatureStore:
    """Load a PCFS file, verifying layout, checksum, and manifest."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4:
        raise TruncatedError(f"{path!r}: shorter than the magic")
    if data[:4] != MAGIC:
        raise BadMagicError(f"{path!r}: bad magic {data[:4]!r}")
    if len(data) < 16 + 8:
        raise TruncatedError(f"{path!r}: header incomplete")
    version, n_dim, n_sentences = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise VersionError(f"{path!r}: version {version}, expected {VERSION}")
    body_end = len(data) - 8
    checksum = fnv1a64(data[:body_end])
    (stored,) = struct.unpack_from("<Q", data, body_end)
    if checksum != stored:
        raise ChecksumError(
            f"{path!r}: checksum {checksum:016x} != stored {stored:016x}")
    offset = 16
    sentences = []
    for i in range(n_sentences):
        if offset + 4 > body_end:
            raise TruncatedError(f"{path!r}: sentence {i} header out of bounds")
        (n_tokens,) = struct.unpack_from("<I", data, offset)
        offset += 4
        nbytes = 4 * n_tokens * n_dim
        if offset + nbytes > body_end:
            raise TruncatedError(f"{path!r}: sentence {i} data out of bounds")
        arr = np.frombuffer(data, dtype="<f4", count=n_tokens * n_dim, offset=offset)
        sentences.append(arr.reshape(n_tokens, n_dim).copy())
        offset += nbytes
    if offset != body_end:
        raise TruncatedError(f"{path!r}: {body_end - offset} trailing payload bytes")
    mpath = manifest_path(path)
    if not mpath.exists():
        raise ManifestError(f"missing manifest {str(mpath)!r}")
    manifest = Manifest.from_json(mpath.read_text(encoding="utf-8"))
    if manifest.content_checksum != checksum:
        raise ManifestError(
            f"{str(mpath)!r}: manifest checksum does not match payload")
    if manifest.n_sentences != n_sentences or manifest.n_dim != n_dim:
        raise ManifestError(f"{str(mpath)!r}: manifest counts do not match payload")
    return FeatureStore(n_dim=n_dim, sentences=sentences, manifest=manifest)

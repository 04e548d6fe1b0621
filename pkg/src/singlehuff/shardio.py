"""``.shard`` files and the ``manifest.json`` that indexes a shard directory.

Shard file layout, little-endian::

    0   4  magic "SHRD"
    4   1  version (1)
    5   1  dtype byte (see Dtype)
    6   2  reserved, zero
    8   8  element count
    16  .. raw element data (layout as in singlehuff.symbolize)

The manifest is a JSON object mapping shard id strings to paths relative
to the directory that holds it.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Iterable

from .errors import MalformedInputError, ShardFormatError
from .formats import Dtype
from .symbolize import ShardId, SymbolStream, desymbolize, symbolize

__all__ = [
    "SHARD_MAGIC",
    "MANIFEST_NAME",
    "encode_shard",
    "decode_shard",
    "write_shard",
    "read_shard",
    "write_shard_dir",
    "read_manifest",
    "read_shard_dir",
    "shard_relpath",
]

SHARD_MAGIC = b"SHRD"
SHARD_VERSION = 1
MANIFEST_NAME = "manifest.json"
_HEADER = struct.Struct("<4sBBHQ")


def _raw_size(dtype: Dtype, elements: int) -> int:
    if dtype is Dtype.BF16:
        return 2 * elements
    if dtype is Dtype.E2M1:
        return (elements + 1) // 2
    return elements


def encode_shard(stream: SymbolStream) -> bytes:
    header = _HEADER.pack(SHARD_MAGIC, SHARD_VERSION, stream.source_dtype.value, 0, stream.element_count)
    return header + desymbolize(stream)


def decode_shard(data: bytes, shard_id=None, *, name: str = "<bytes>") -> SymbolStream:
    if len(data) < _HEADER.size:
        raise ShardFormatError(f"{name}: truncated header")
    magic, version, dtype_byte, reserved, elements = _HEADER.unpack_from(data)
    if magic != SHARD_MAGIC:
        raise ShardFormatError(f"{name}: bad magic {magic!r}")
    if version != SHARD_VERSION:
        raise ShardFormatError(f"{name}: unsupported version {version}")
    if reserved:
        raise ShardFormatError(f"{name}: reserved field must be zero")
    try:
        dtype = Dtype(dtype_byte)
    except ValueError:
        raise ShardFormatError(f"{name}: unknown dtype byte {dtype_byte}") from None
    body = data[_HEADER.size:]
    if len(body) != _raw_size(dtype, elements):
        raise ShardFormatError(
            f"{name}: expected {_raw_size(dtype, elements)} data bytes for {elements} elements, got {len(body)}"
        )
    try:
        return symbolize(body, dtype, element_count=None if dtype is Dtype.BF16 else elements,
                         shard_id=shard_id)
    except MalformedInputError as exc:
        raise ShardFormatError(f"{name}: {exc}") from None


def write_shard(path, stream: SymbolStream) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_shard(stream))


def read_shard(path, shard_id=None) -> SymbolStream:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ShardFormatError(f"{path}: {exc.strerror or exc}") from None
    return decode_shard(data, shard_id, name=str(path))


def shard_relpath(shard_id) -> str:
    if isinstance(shard_id, ShardId):
        return f"{shard_id.kind}/L{shard_id.layer:02d}/S{shard_id.shard:03d}.shard"
    return f"{shard_id}.shard"


def write_shard_dir(directory, streams: Iterable[SymbolStream]) -> dict:
    """Write every stream plus a manifest. Returns the manifest mapping."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for stream in streams:
        if stream.shard_id is None:
            raise ValueError("streams written to a shard directory need a shard_id")
        key = str(stream.shard_id)
        if key in manifest:
            raise ValueError(f"duplicate shard id {key}")
        rel = shard_relpath(stream.shard_id)
        write_shard(directory / rel, stream)
        manifest[key] = rel
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def _parse_shard_id(key: str):
    try:
        return ShardId.parse(key)
    except ValueError:
        return key


def read_manifest(directory) -> dict:
    path = Path(directory) / MANIFEST_NAME
    try:
        manifest = json.loads(path.read_text())
    except FileNotFoundError:
        raise ShardFormatError(f"{path}: manifest not found") from None
    except (OSError, ValueError) as exc:
        raise ShardFormatError(f"{path}: {exc}") from None
    if not isinstance(manifest, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in manifest.items()
    ):
        raise ShardFormatError(f"{path}: manifest must map shard ids to relative paths")
    for rel in manifest.values():
        if os.path.isabs(rel) or ".." in Path(rel).parts:
            raise ShardFormatError(f"{path}: path {rel!r} escapes the shard directory")
    return manifest


def _sort_key(key: str):
    sid = _parse_shard_id(key)
    return (0, sid, "") if isinstance(sid, ShardId) else (1, ShardId("", 0, 0), key)


def read_shard_dir(directory) -> list[SymbolStream]:
    """Load every shard listed in the manifest, ordered by shard id."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    return [
        read_shard(directory / manifest[key], _parse_shard_id(key))
        for key in sorted(manifest, key=_sort_key)
    ]

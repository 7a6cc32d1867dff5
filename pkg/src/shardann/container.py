"""Versioned binary container for serialized indexes.

Little-endian layout:

    0   magic    4 bytes  "PWIX"
    4   version  u32      currently 1
    8   d        u32      vector dimension
    12  N        u32      shard count
    16  n_total  u32      points across all shards
    20  count    u32      number of sections
    24  section table, 28 bytes per entry:
        shard u32 | kind u32 | offset u64 | length u64 | crc32c u32
    ..  section payloads at their recorded offsets

Section kinds (all payloads little-endian arrays):

    1 META        9 x u32: n_local, j, g, j_g, W, has_inter, has_ghost,
                  has_dir, padded (1 if any adjacency row repeats its last
                  neighbor to reach fixed width)
    2 GLOBAL_IDS  n_local x i32 global point ids
    3 ADJ         n_local*j x i32 adjacency, row-major
    4 INTER       n_local x i32 local ids in the next shard of the ring
    5 GHOST_IDS   g x i32 parent-local ids of the sampled ghost nodes
    6 GHOST_ADJ   g*j_g x i32 ghost graph adjacency, row-major
    7 DIRECTION   n_local*j*W x u32 packed edge sign bits

Every section checksum is verified on load; any layout change bumps the
format version.
"""

from __future__ import annotations

import struct

import numpy as np

from ._crc32c import crc32c
from .graphs import Index, ShardPack

MAGIC = b"PWIX"
FORMAT_VERSION = 1

_K_META, _K_IDS, _K_ADJ, _K_INTER, _K_GHOST_IDS, _K_GHOST_ADJ, _K_DIR = range(1, 8)
_HEADER = struct.Struct("<4sIIIII")
_SECTION = struct.Struct("<IIQQI")


class IndexFormatError(ValueError):
    """Malformed index container."""


class VersionError(IndexFormatError):
    """Container written by an unknown (newer) format version."""


class ChecksumError(IndexFormatError):
    """Section payload does not match its recorded CRC-32C."""


def _has_padded_rows(adj: np.ndarray | None) -> bool:
    """True when any adjacency row repeats a neighbor (degree-deficit padding)."""
    if adj is None or adj.shape[1] < 2:
        return False
    rows = np.sort(adj, axis=1)
    return bool((rows[:, 1:] == rows[:, :-1]).any())


def _shard_sections(pack: ShardPack, d: int) -> list[tuple[int, bytes]]:
    n_local, j = pack.adj.shape
    g, j_g = (pack.ghost_adj.shape if pack.ghost_adj is not None else (0, 0))
    w = pack.direction.shape[2] if pack.direction is not None else 0
    padded = _has_padded_rows(pack.adj) or _has_padded_rows(pack.ghost_adj)
    meta = np.array(
        [n_local, j, g, j_g, w,
         int(pack.inter_map is not None),
         int(pack.ghost_ids is not None),
         int(pack.direction is not None),
         int(padded)],
        dtype="<u4",
    )
    sections = [
        (_K_META, meta.tobytes()),
        (_K_IDS, pack.global_ids.astype("<i4").tobytes()),
        (_K_ADJ, pack.adj.astype("<i4").tobytes()),
    ]
    if pack.inter_map is not None:
        sections.append((_K_INTER, pack.inter_map.astype("<i4").tobytes()))
    if pack.ghost_ids is not None:
        sections.append((_K_GHOST_IDS, pack.ghost_ids.astype("<i4").tobytes()))
        sections.append((_K_GHOST_ADJ, pack.ghost_adj.astype("<i4").tobytes()))
    if pack.direction is not None:
        sections.append((_K_DIR, pack.direction.astype("<u4").tobytes()))
    return sections


def serialize_index(index: Index, path) -> None:
    """Write the index; byte-identical output for value-identical indexes."""
    per_shard = [_shard_sections(pack, index.d) for pack in index.shards]
    count = sum(len(s) for s in per_shard)
    offset = _HEADER.size + count * _SECTION.size
    table = []
    payloads = []
    for shard, sections in enumerate(per_shard):
        for kind, payload in sections:
            table.append((shard, kind, offset, len(payload), crc32c(payload)))
            payloads.append(payload)
            offset += len(payload)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, index.d, index.n_shards,
                             index.n_total, count))
        for entry in table:
            f.write(_SECTION.pack(*entry))
        for payload in payloads:
            f.write(payload)


def _read_array(blob: bytes, entry, dtype, path) -> np.ndarray:
    shard, kind, offset, length, crc = entry
    payload = blob[offset : offset + length]
    if len(payload) != length:
        raise IndexFormatError(f"{path}: truncated section (shard {shard}, kind {kind})")
    if crc32c(payload) != crc:
        raise ChecksumError(f"{path}: checksum mismatch in section (shard {shard}, kind {kind})")
    return np.frombuffer(payload, dtype=dtype).copy()


def deserialize_index(path) -> Index:
    """Read and verify an index container; inverse of serialize_index."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise IndexFormatError(f"{path}: too short for a header")
    magic, version, d, n_shards, n_total, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise IndexFormatError(f"{path}: bad magic {magic!r}, not an index container")
    if version > FORMAT_VERSION:
        raise VersionError(
            f"{path}: format version {version} is newer than supported {FORMAT_VERSION}"
        )
    table_end = _HEADER.size + count * _SECTION.size
    if len(blob) < table_end:
        raise IndexFormatError(f"{path}: truncated section table")
    by_shard: dict[int, dict[int, tuple]] = {}
    for i in range(count):
        entry = _SECTION.unpack_from(blob, _HEADER.size + i * _SECTION.size)
        by_shard.setdefault(entry[0], {})[entry[1]] = entry

    packs = []
    for s in range(n_shards):
        sections = by_shard.get(s)
        if sections is None or _K_META not in sections:
            raise IndexFormatError(f"{path}: missing sections for shard {s}")
        meta = _read_array(blob, sections[_K_META], "<u4", path)
        n_local, j, g, j_g, w, has_inter, has_ghost, has_dir = (int(x) for x in meta[:8])
        ids = _read_array(blob, sections[_K_IDS], "<i4", path)
        adj = _read_array(blob, sections[_K_ADJ], "<i4", path).reshape(n_local, j)
        inter = ghost_ids = ghost_adj = direction = None
        if has_inter:
            inter = _read_array(blob, sections[_K_INTER], "<i4", path)
        if has_ghost:
            ghost_ids = _read_array(blob, sections[_K_GHOST_IDS], "<i4", path)
            ghost_adj = _read_array(blob, sections[_K_GHOST_ADJ], "<i4", path).reshape(g, j_g)
        if has_dir:
            direction = _read_array(blob, sections[_K_DIR], "<u4", path).reshape(n_local, j, w)
        packs.append(ShardPack(ids, adj, inter, ghost_ids, ghost_adj, direction))
    return Index(d=int(d), n_total=int(n_total), shards=packs)


def index_equal(a: Index, b: Index) -> bool:
    """Value equality over every array of two indexes."""
    def arr_eq(x, y):
        if x is None or y is None:
            return x is None and y is None
        return x.shape == y.shape and bool(np.array_equal(x, y))

    if (a.d, a.n_total, a.n_shards) != (b.d, b.n_total, b.n_shards):
        return False
    for pa, pb in zip(a.shards, b.shards):
        for name in ("global_ids", "adj", "inter_map", "ghost_ids", "ghost_adj", "direction"):
            if not arr_eq(getattr(pa, name), getattr(pb, name)):
                return False
    return True


def index_file_checksum(path) -> str:
    """CRC-32C of the whole container file, hex-encoded (for run manifests)."""
    with open(path, "rb") as f:
        return f"{crc32c(f.read()):08x}"

"""Public statement and private witness for one redacted chunk.

The statement says: taking the published 64-byte chunk, writing the hidden
bytes back into the listed [start, end) spans, and running one SHA-256
compression round on the result advances the chaining state from prev_state
to next_state.  The hidden bytes themselves are the witness.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

CHUNK_SIZE = 64

# Upper bound on hidden bytes per chunk; a chunk cannot hide more bytes than
# it holds, so with the chunk size itself as the bound every span fits.
DEL_DATA_LENGTH = 64

Layout = tuple[tuple[int, int], ...]


class BadLayout(ValueError):
    pass


def normalize_layout(spans) -> Layout:
    """Sorted, validated [start, end) spans relative to one chunk."""
    out = tuple(sorted((int(s), int(e)) for s, e in spans))
    prev_end = 0
    for s, e in out:
        if not (0 <= s < e <= CHUNK_SIZE):
            raise BadLayout(f"span [{s}, {e}) outside chunk bounds")
        if s < prev_end:
            raise BadLayout(f"span [{s}, {e}) overlaps a previous span")
        prev_end = e
    return out


def layout_size(layout: Layout) -> int:
    return sum(e - s for s, e in layout)


@dataclass(frozen=True)
class ChunkStatement:
    chunk_index: int
    prev_state: tuple[int, ...]      # 8 words
    chunk: bytes                     # 64 bytes, hidden spans zero-filled
    layout: Layout
    next_state: tuple[int, ...]      # 8 words

    def __post_init__(self):
        if len(self.prev_state) != 8 or len(self.next_state) != 8:
            raise ValueError("chaining states must have 8 words")
        if len(self.chunk) != CHUNK_SIZE:
            raise ValueError(f"chunk must be {CHUNK_SIZE} bytes")
        object.__setattr__(self, "layout", normalize_layout(self.layout))

    def digest(self) -> bytes:
        """Canonical hash binding every public input."""
        starts = bytearray(CHUNK_SIZE)
        ends = bytearray(CHUNK_SIZE)
        for i, (s, e) in enumerate(self.layout):
            starts[i] = s
            ends[i] = e
        h = hashlib.sha256()
        h.update(b"ZKRSTMT1")
        for w in self.prev_state:
            h.update(int(w).to_bytes(4, "big"))
        h.update(self.chunk)
        h.update(bytes(starts))
        h.update(bytes(ends))
        for w in self.next_state:
            h.update(int(w).to_bytes(4, "big"))
        return h.digest()


@dataclass(frozen=True)
class ChunkWitness:
    deleted_data: bytes

    def matches(self, layout: Layout) -> bool:
        return len(self.deleted_data) == layout_size(layout)

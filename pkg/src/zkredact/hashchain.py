"""Decomposed SHA-256 and Bitcoin-style Merkle roots.

The point of decomposing: a double-SHA256 transaction id is SHA256 applied
to an inner digest, and the inner digest is a chain of compression rounds
over 64-byte chunks.  Exposing every intermediate chaining state lets a
verifier recompute most of the chain from public bytes and splice in proved
transitions for the chunks whose bytes were deleted.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .kernels import SHA_IV, sha_compress_blocks

CHUNK_SIZE = 64

IV = tuple(int(x) for x in SHA_IV)


@dataclass(frozen=True)
class ShaState:
    """One SHA-256 chaining state: eight 32-bit words."""

    words: tuple[int, ...]

    def __post_init__(self):
        if len(self.words) != 8:
            raise ValueError("state needs exactly 8 words")
        if any(not 0 <= w <= 0xFFFFFFFF for w in self.words):
            raise ValueError("state words must be 32-bit")

    def to_bytes(self) -> bytes:
        return b"".join(w.to_bytes(4, "big") for w in self.words)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ShaState":
        if len(raw) != 32:
            raise ValueError("state encoding must be 32 bytes")
        return cls(tuple(int.from_bytes(raw[i:i + 4], "big") for i in range(0, 32, 4)))

    def __iter__(self):
        return iter(self.words)


INITIAL_STATE = ShaState(IV)


def pad(message: bytes) -> list[bytes]:
    """FIPS 180-4 padding, split into 64-byte chunks.

    Appends 0x80, zero fill, and the 8-byte big-endian bit length; output
    length is the smallest multiple of 64 that fits.
    """
    length = len(message)
    padded = (message + b"\x80" + b"\x00" * ((55 - length) % 64)
              + (8 * length).to_bytes(8, "big"))
    return [padded[i:i + CHUNK_SIZE] for i in range(0, len(padded), CHUNK_SIZE)]


def chunk_count(length: int) -> int:
    """Number of chunks a message of `length` bytes pads to."""
    return (length + 8) // 64 + 1


def _to_blocks(chunks: list[bytes]) -> np.ndarray:
    raw = b"".join(chunks)
    return np.frombuffer(raw, dtype=">u4").reshape(-1, 16).astype(np.uint32)


def sha_round(state: ShaState, chunk: bytes) -> ShaState:
    """One compression round: absorb a single 64-byte chunk."""
    if len(chunk) != CHUNK_SIZE:
        raise ValueError(f"chunk must be {CHUNK_SIZE} bytes, got {len(chunk)}")
    st = np.array(state.words, dtype=np.uint32)
    out = sha_compress_blocks(_to_blocks([chunk]), st)
    return ShaState(tuple(int(x) for x in out[1]))


@dataclass(frozen=True)
class DigestChain:
    """All chaining states h_0 .. h_m of one padded message."""

    states: tuple[ShaState, ...]

    @property
    def rounds(self) -> int:
        return len(self.states) - 1

    def final_digest(self) -> bytes:
        return self.states[-1].to_bytes()


def digest_chain(message: bytes) -> DigestChain:
    chunks = pad(message)
    out = sha_compress_blocks(_to_blocks(chunks), np.array(IV, dtype=np.uint32))
    states = tuple(ShaState(tuple(int(w) for w in row)) for row in out)
    return DigestChain(states)


class EmptyLeafSet(ValueError):
    pass


def merkle_root(leaves: list[bytes]) -> bytes:
    """Bitcoin block Merkle root over 32-byte leaves.

    Pairs are joined with double SHA-256; an odd node at any level is paired
    with itself; a single leaf is its own root.
    """
    if not leaves:
        raise EmptyLeafSet("merkle root of zero leaves is undefined")
    level = list(leaves)
    for leaf in level:
        if len(leaf) != 32:
            raise ValueError("merkle leaves must be 32 bytes")
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [
            hashlib.sha256(hashlib.sha256(level[i] + level[i + 1]).digest()).digest()
            for i in range(0, len(level), 2)
        ]
    return level[0]


def double_sha256(data: bytes) -> bytes:
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()

"""Binary Merkle tree over a power-of-two number of leaves.

Leaves are hashed with a salt so openings do not leak sibling contents;
interior nodes are plain SHA-256 of the two children.
"""

from __future__ import annotations

import hashlib


def leaf_hash(salt: bytes, payload: bytes) -> bytes:
    return hashlib.sha256(b"leaf" + salt + payload).digest()


class MerkleTree:
    def __init__(self, leaf_hashes: list[bytes]):
        n = len(leaf_hashes)
        if n < 1 or n & (n - 1):
            raise ValueError("leaf count must be a power of two")
        self.n = n
        # nodes[1] is the root; children of i are 2i, 2i+1
        nodes = [b""] * (2 * n)
        nodes[n:] = leaf_hashes
        for i in range(n - 1, 0, -1):
            nodes[i] = hashlib.sha256(nodes[2 * i] + nodes[2 * i + 1]).digest()
        self._nodes = nodes

    @property
    def root(self) -> bytes:
        return self._nodes[1]

    def path(self, index: int) -> list[bytes]:
        if not 0 <= index < self.n:
            raise IndexError(index)
        out = []
        i = index + self.n
        while i > 1:
            out.append(self._nodes[i ^ 1])
            i >>= 1
        return out


def verify_path(root: bytes, index: int, leaf: bytes, path: list[bytes]) -> bool:
    h = leaf
    i = index
    for sibling in path:
        if i & 1:
            h = hashlib.sha256(sibling + h).digest()
        else:
            h = hashlib.sha256(h + sibling).digest()
        i >>= 1
    return i == 0 and h == root

"""Fiat-Shamir transcript: SHA-256 ratchet, SHAKE-256 challenge expansion.

Every absorbed message updates a running state; every challenge both reads
and ratchets the state, so challenge order is bound into later challenges.
"""

from __future__ import annotations

import hashlib

import numpy as np

from . import field


def _frame(label: bytes, data: bytes) -> bytes:
    return len(label).to_bytes(2, "big") + label + len(data).to_bytes(8, "big") + data


class Transcript:
    def __init__(self, domain: bytes):
        self._state = hashlib.sha256(_frame(b"domain", domain)).digest()

    def absorb(self, label: bytes, data: bytes):
        self._state = hashlib.sha256(self._state + _frame(label, data)).digest()

    def challenge_bytes(self, label: bytes, n: int) -> bytes:
        out = hashlib.shake_256(self._state + _frame(label, b"")).digest(n)
        self._state = hashlib.sha256(self._state + _frame(b"ratchet:" + label, b"")).digest()
        return out

    def challenge_fields(self, label: bytes, count: int) -> np.ndarray:
        seed = self.challenge_bytes(label, 32)
        return field.expand_challenge(seed, count)

    def challenge_indices(self, label: bytes, count: int, bound: int) -> list[int]:
        seed = self.challenge_bytes(label, 32)
        return field.expand_indices(seed, count, bound)

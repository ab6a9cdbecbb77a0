"""Rank-1 constraint systems over the Goldilocks field.

A constraint is A_i(v) * B_i(v) = C_i(v) for sparse linear combinations over
the wire vector v.  Wire 0 is pinned to 1 so constants are ordinary matrix
entries; wires 1..num_public are the statement, the rest are private.

The three matrices are stored CSR-style (indptr/wires/coeffs per matrix),
which is what the satisfiability check and the sound backend consume.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field as dfield

import numpy as np

from ..kernels import gl_mul, segment_sum_mod
from .field import PRIME

_MAGIC = b"ZKR1CS01"


@dataclass(frozen=True)
class SparseMatrix:
    indptr: np.ndarray   # int64, num_constraints + 1
    wires: np.ndarray    # int64
    coeffs: np.ndarray   # uint64, canonical

    def row(self, i: int) -> dict[int, int]:
        lo, hi = int(self.indptr[i]), int(self.indptr[i + 1])
        return {int(w): int(c) for w, c in zip(self.wires[lo:hi], self.coeffs[lo:hi])}

    def matvec(self, values: np.ndarray) -> np.ndarray:
        terms = gl_mul(self.coeffs, values[self.wires])
        return segment_sum_mod(terms, self.indptr)


@dataclass(frozen=True)
class ConstraintSystem:
    num_public: int
    num_private: int
    a: SparseMatrix
    b: SparseMatrix
    c: SparseMatrix
    prime: int = PRIME
    _digest: list = dfield(default_factory=list, repr=False, compare=False)

    @property
    def num_wires(self) -> int:
        # wire 0 is the constant one
        return 1 + self.num_public + self.num_private

    @property
    def num_constraints(self) -> int:
        return len(self.a.indptr) - 1

    def constraint(self, i: int) -> tuple[dict[int, int], dict[int, int], dict[int, int]]:
        return self.a.row(i), self.b.row(i), self.c.row(i)

    def _chunks(self):
        yield _MAGIC
        yield self.prime.to_bytes(8, "little")
        yield self.num_public.to_bytes(4, "little")
        yield self.num_private.to_bytes(4, "little")
        yield self.num_constraints.to_bytes(4, "little")
        for m in (self.a, self.b, self.c):
            yield len(m.wires).to_bytes(8, "little")
            yield m.indptr.astype("<i8").tobytes()
            yield m.wires.astype("<u4").tobytes()
            yield m.coeffs.astype("<u8").tobytes()

    def serialize(self) -> bytes:
        return b"".join(self._chunks())

    def digest(self) -> bytes:
        if not self._digest:
            h = hashlib.sha256()
            for part in self._chunks():
                h.update(part)
            self._digest.append(h.digest())
        return self._digest[0]


@dataclass
class Assignment:
    """Wire values: [1, publics..., privates...], canonical uint64."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.uint64)

    def public_slice(self, cs: ConstraintSystem) -> np.ndarray:
        return self.values[1:1 + cs.num_public]


def _check_assignment(cs: ConstraintSystem, assignment: Assignment) -> np.ndarray:
    v = assignment.values
    if v.ndim != 1 or len(v) != cs.num_wires:
        raise ValueError(f"assignment has {len(v)} wires, system expects {cs.num_wires}")
    if int(v[0]) != 1:
        raise ValueError("wire 0 must be 1")
    return v


def products(cs: ConstraintSystem, assignment: Assignment):
    """Per-constraint values of the three linear combinations."""
    v = _check_assignment(cs, assignment)
    return cs.a.matvec(v), cs.b.matvec(v), cs.c.matvec(v)


def is_satisfied(cs: ConstraintSystem, assignment: Assignment) -> bool:
    av, bv, cv = products(cs, assignment)
    return bool(np.array_equal(gl_mul(av, bv), cv))


class Builder:
    """Accumulates constraints as dict linear combinations, freezes to CSR."""

    def __init__(self, num_public: int):
        self.num_public = num_public
        self.next_wire = 1 + num_public
        self._rows: list[list[int]] = [[], [], []]   # flattened (wire, coeff) pairs
        self._ptrs: list[list[int]] = [[0], [0], [0]]

    def new_wire(self) -> int:
        w = self.next_wire
        self.next_wire += 1
        return w

    def add_constraint(self, a: dict[int, int], b: dict[int, int], c: dict[int, int]):
        for slot, lc in enumerate((a, b, c)):
            flat = self._rows[slot]
            for wire in sorted(lc):
                coeff = lc[wire] % PRIME
                if coeff:
                    flat.append(wire)
                    flat.append(coeff)
            self._ptrs[slot].append(len(flat) // 2)

    @property
    def num_constraints(self) -> int:
        return len(self._ptrs[0]) - 1

    def freeze(self) -> ConstraintSystem:
        mats = []
        for slot in range(3):
            flat = np.array(self._rows[slot], dtype=np.uint64).reshape(-1, 2)
            mats.append(SparseMatrix(
                indptr=np.array(self._ptrs[slot], dtype=np.int64),
                wires=flat[:, 0].astype(np.int64),
                coeffs=flat[:, 1].astype(np.uint64),
            ))
        return ConstraintSystem(
            num_public=self.num_public,
            num_private=self.next_wire - 1 - self.num_public,
            a=mats[0], b=mats[1], c=mats[2],
        )


def lc_add(*lcs: dict[int, int]) -> dict[int, int]:
    out: dict[int, int] = {}
    for lc in lcs:
        for w, c in lc.items():
            nc = (out.get(w, 0) + c) % PRIME
            if nc:
                out[w] = nc
            elif w in out:
                del out[w]
    return out


def lc_scale(lc: dict[int, int], k: int) -> dict[int, int]:
    k %= PRIME
    if not k:
        return {}
    return {w: (c * k) % PRIME for w, c in lc.items()}

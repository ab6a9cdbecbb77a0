"""Chunk circuit: one SHA-256 compression round with hidden-byte splicing.

compile_chunk_circuit builds, for a given span layout, a constraint system
whose public wires are (prev_state words, published chunk bytes, next_state
words) and whose first private wires are the hidden bytes.  Spliced bytes
are pure wire routing, so layouts with equal spans compile to equal systems.

Arithmetization, all over the Goldilocks field:

    XOR of two bits       1 constraint  (m = x*y, result x + y - 2m)
    choose(e, f, g)       1 constraint  (t = e*(f-g), result t + g)
    majority(a, b, c)     2 constraints (t = a*b, u = c*(a+b-2t), t + u)
    rotations / shifts    wire routing inside XOR trees
    32-bit additions      decompose the wide sum, keep the low 32 bits,
                          range-check the few carry bits as booleans

Alongside the constraints the compiler records a levelized witness program
(batched multiply / bit-decompose steps) that `assign` replays to fill all
internal wires; the two views come from the same single pass, so they cannot
drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..kernels import (
    STEP_BITS,
    STEP_MUL,
    SHA_K,
    run_witness_program,
)
from .field import PRIME
from .r1cs import Assignment, Builder, ConstraintSystem, lc_add, lc_scale
from .statement import (
    CHUNK_SIZE,
    BadLayout,
    ChunkStatement,
    ChunkWitness,
    Layout,
    layout_size,
    normalize_layout,
)

NUM_PUBLIC = 8 + CHUNK_SIZE + 8   # prev words, chunk bytes, next words


class LayoutMismatch(ValueError):
    pass


@dataclass(frozen=True)
class WitnessProgram:
    kinds: np.ndarray
    out_ptr: np.ndarray
    out_idx: np.ndarray
    widths: np.ndarray
    a_ptr: np.ndarray
    a_wire: np.ndarray
    a_coef: np.ndarray
    a_const: np.ndarray
    b_ptr: np.ndarray
    b_wire: np.ndarray
    b_coef: np.ndarray
    b_const: np.ndarray
    batch_ptr: np.ndarray


@dataclass(frozen=True)
class ChunkCircuit:
    layout: Layout
    cs: ConstraintSystem
    program: WitnessProgram
    num_witness_bytes: int

    def public_input(self, statement: ChunkStatement) -> np.ndarray:
        if normalize_layout(statement.layout) != self.layout:
            raise LayoutMismatch("statement layout differs from compiled layout")
        pub = np.empty(NUM_PUBLIC, dtype=np.uint64)
        pub[0:8] = statement.prev_state
        pub[8:8 + CHUNK_SIZE] = np.frombuffer(statement.chunk, dtype=np.uint8)
        pub[8 + CHUNK_SIZE:] = statement.next_state
        return pub


class _Compiler(Builder):
    """Builder plus the levelized witness-program recorder."""

    def __init__(self):
        super().__init__(NUM_PUBLIC)
        self._steps: list[tuple] = []      # (kind, out_wires, width, a_lc, b_lc)
        self._batch_ptr = [0]
        self._pending: set[int] = set()
        self._kind = -1

    def _record(self, kind: int, outs: list[int], width: int,
                a_lc: dict[int, int], b_lc: dict[int, int]):
        ins = set(a_lc) | set(b_lc)
        if kind != self._kind or ins & self._pending:
            if self._steps and self._batch_ptr[-1] != len(self._steps):
                self._batch_ptr.append(len(self._steps))
            self._pending = set()
            self._kind = kind
        self._steps.append((kind, outs, width, a_lc, b_lc))
        self._pending.update(outs)

    def mul(self, a_lc: dict[int, int], b_lc: dict[int, int]) -> int:
        out = self.new_wire()
        self.add_constraint(a_lc, b_lc, {out: 1})
        self._record(STEP_MUL, [out], 1, a_lc, b_lc)
        return out

    def bits(self, lc: dict[int, int], width: int) -> list[int]:
        """Decompose the value of `lc` into `width` boolean wires.

        Emits one booleanity constraint per bit plus the recomposition
        equality, which is exactly the range check 0 <= value < 2^width.
        """
        outs = [self.new_wire() for _ in range(width)]
        for w in outs:
            self.add_constraint({w: 1}, {w: 1, 0: -1}, {})
        recomp = {w: 1 << i for i, w in enumerate(outs)}
        self.add_constraint(lc_add(lc, lc_scale(recomp, -1)), {0: 1}, {})
        self._record(STEP_BITS, outs, width, lc, {})
        return outs

    def assert_eq(self, lhs: dict[int, int], rhs: dict[int, int]):
        self.add_constraint(lc_add(lhs, lc_scale(rhs, -1)), {0: 1}, {})

    def freeze_program(self) -> WitnessProgram:
        if self._batch_ptr[-1] != len(self._steps):
            self._batch_ptr.append(len(self._steps))
        n = len(self._steps)
        kinds = np.empty(n, dtype=np.int64)
        widths = np.empty(n, dtype=np.int64)
        out_ptr = np.zeros(n + 1, dtype=np.int64)
        a_ptr = np.zeros(n + 1, dtype=np.int64)
        b_ptr = np.zeros(n + 1, dtype=np.int64)
        a_const = np.zeros(n, dtype=np.uint64)
        b_const = np.zeros(n, dtype=np.uint64)
        out_idx: list[int] = []
        a_wire: list[int] = []
        a_coef: list[int] = []
        b_wire: list[int] = []
        b_coef: list[int] = []

        def push(lc, wires, coefs, const_arr, s):
            for w in sorted(lc):
                if w == 0:
                    const_arr[s] = lc[w] % PRIME
                else:
                    wires.append(w)
                    coefs.append(lc[w] % PRIME)

        for s, (kind, outs, width, a_lc, b_lc) in enumerate(self._steps):
            kinds[s] = kind
            widths[s] = width
            out_idx.extend(outs)
            out_ptr[s + 1] = len(out_idx)
            push(a_lc, a_wire, a_coef, a_const, s)
            a_ptr[s + 1] = len(a_wire)
            push(b_lc, b_wire, b_coef, b_const, s)
            b_ptr[s + 1] = len(b_wire)

        return WitnessProgram(
            kinds=kinds,
            out_ptr=out_ptr,
            out_idx=np.array(out_idx, dtype=np.int64),
            widths=widths,
            a_ptr=a_ptr,
            a_wire=np.array(a_wire, dtype=np.int64),
            a_coef=np.array(a_coef, dtype=np.uint64),
            a_const=a_const,
            b_ptr=b_ptr,
            b_wire=np.array(b_wire, dtype=np.int64),
            b_coef=np.array(b_coef, dtype=np.uint64),
            b_const=b_const,
            batch_ptr=np.array(self._batch_ptr, dtype=np.int64),
        )


def _bits_lc(bit_wires: list[int]) -> dict[int, int]:
    return {w: 1 << i for i, w in enumerate(bit_wires)}


def _xor_lc(cc: _Compiler, x: dict[int, int], y: dict[int, int]) -> dict[int, int]:
    m = cc.mul(x, y)
    return lc_add(x, y, {m: -2})


def _xor3_rotations(cc: _Compiler, bit_wires: list[int], rots: tuple[int, ...],
                    shift: int | None = None) -> list[dict[int, int]]:
    """Per-bit XOR of rotated (and optionally shifted) copies of a word."""
    out = []
    for j in range(32):
        terms = [{bit_wires[(j + r) % 32]: 1} for r in rots]
        if shift is not None and j + shift < 32:
            terms.append({bit_wires[j + shift]: 1})
        acc = terms[0]
        for t in terms[1:]:
            acc = _xor_lc(cc, acc, t)
        out.append(acc)
    return out


def _recomp(bit_lcs: list[dict[int, int]]) -> dict[int, int]:
    return lc_add(*(lc_scale(lc, 1 << i) for i, lc in enumerate(bit_lcs)))


def _choose(cc: _Compiler, e: list[int], f: list[int], g: list[int]) -> list[dict[int, int]]:
    out = []
    for j in range(32):
        t = cc.mul({e[j]: 1}, {f[j]: 1, g[j]: -1})
        out.append({t: 1, g[j]: 1})
    return out


def _majority(cc: _Compiler, a: list[int], b: list[int], c: list[int]) -> list[dict[int, int]]:
    out = []
    for j in range(32):
        t = cc.mul({a[j]: 1}, {b[j]: 1})
        u = cc.mul({c[j]: 1}, {a[j]: 1, b[j]: 1, t: -2})
        out.append({t: 1, u: 1})
    return out


def _compile(layout: Layout) -> ChunkCircuit:
    cc = _Compiler()
    nw = layout_size(layout)
    witness_wires = [cc.new_wire() for _ in range(nw)]

    hidden = {}
    rank = 0
    for s, e in layout:
        for pos in range(s, e):
            hidden[pos] = witness_wires[rank]
            rank += 1

    # bytes of the original chunk: hidden spans come from the witness,
    # everything else from the published chunk (splice by routing)
    byte_bits = []
    for pos in range(CHUNK_SIZE):
        wire = hidden.get(pos, 1 + 8 + pos)
        byte_bits.append(cc.bits({wire: 1}, 8))

    # big-endian 32-bit schedule words from bytes
    w_bits: list[list[int]] = []
    for t in range(16):
        bits = [byte_bits[4 * t + 3 - (j // 8)][j % 8] for j in range(32)]
        w_bits.append(bits)

    for t in range(16, 64):
        s0 = _xor3_rotations(cc, w_bits[t - 15], (7, 18), shift=3)
        s1 = _xor3_rotations(cc, w_bits[t - 2], (17, 19), shift=10)
        total = lc_add(_recomp(s0), _recomp(s1),
                       _bits_lc(w_bits[t - 7]), _bits_lc(w_bits[t - 16]))
        # sum of four 32-bit words fits in 34 bits
        w_bits.append(cc.bits(total, 34)[:32])

    prev_wire = [1 + i for i in range(8)]
    a_bits = cc.bits({prev_wire[0]: 1}, 32)
    b_bits = cc.bits({prev_wire[1]: 1}, 32)
    c_bits = cc.bits({prev_wire[2]: 1}, 32)
    d_lc = {prev_wire[3]: 1}
    e_bits = cc.bits({prev_wire[4]: 1}, 32)
    f_bits = cc.bits({prev_wire[5]: 1}, 32)
    g_bits = cc.bits({prev_wire[6]: 1}, 32)
    h_lc = {prev_wire[7]: 1}

    for t in range(64):
        s1 = _xor3_rotations(cc, e_bits, (6, 11, 25))
        ch = _choose(cc, e_bits, f_bits, g_bits)
        t1 = lc_add(h_lc, _recomp(s1), _recomp(ch),
                    {0: int(SHA_K[t])}, _bits_lc(w_bits[t]))
        # d + t1 is a sum of six 32-bit quantities: 35 bits
        new_e = cc.bits(lc_add(d_lc, t1), 35)[:32]
        s0 = _xor3_rotations(cc, a_bits, (2, 13, 22))
        mj = _majority(cc, a_bits, b_bits, c_bits)
        new_a = cc.bits(lc_add(t1, _recomp(s0), _recomp(mj)), 35)[:32]
        h_lc = _bits_lc(g_bits)
        g_bits = f_bits
        f_bits = e_bits
        e_bits = new_e
        d_lc = _bits_lc(c_bits)
        c_bits = b_bits
        b_bits = a_bits
        a_bits = new_a

    # feed-forward and binding to the public next_state words
    finals = [_bits_lc(a_bits), _bits_lc(b_bits), _bits_lc(c_bits), d_lc,
              _bits_lc(e_bits), _bits_lc(f_bits), _bits_lc(g_bits), h_lc]
    for i in range(8):
        out = cc.bits(lc_add({prev_wire[i]: 1}, finals[i]), 33)[:32]
        cc.assert_eq(_bits_lc(out), {1 + 8 + CHUNK_SIZE + i: 1})

    return ChunkCircuit(
        layout=layout,
        cs=cc.freeze(),
        program=cc.freeze_program(),
        num_witness_bytes=nw,
    )


@lru_cache(maxsize=8)
def _compile_cached(layout: Layout) -> ChunkCircuit:
    return _compile(layout)


def compile_chunk_circuit(spans) -> ChunkCircuit:
    """Constraint system + witness program for one span layout.

    Layouts are normalized first, so span order does not matter; equal span
    sets return the identical cached object.
    """
    return _compile_cached(normalize_layout(spans))


def assign(circuit: ChunkCircuit, statement: ChunkStatement,
           witness: ChunkWitness) -> Assignment:
    """Fill every wire: publics, hidden bytes, then the replayed program."""
    if not witness.matches(circuit.layout):
        raise LayoutMismatch(
            f"witness has {len(witness.deleted_data)} bytes, "
            f"layout hides {layout_size(circuit.layout)}")
    values = np.zeros(circuit.cs.num_wires, dtype=np.uint64)
    values[0] = 1
    values[1:1 + NUM_PUBLIC] = circuit.public_input(statement)
    nw = circuit.num_witness_bytes
    if nw:
        values[1 + NUM_PUBLIC:1 + NUM_PUBLIC + nw] = np.frombuffer(
            witness.deleted_data, dtype=np.uint8)
    p = circuit.program
    run_witness_program(values, p.kinds, p.out_ptr, p.out_idx, p.widths,
                        p.a_ptr, p.a_wire, p.a_coef, p.a_const,
                        p.b_ptr, p.b_wire, p.b_coef, p.b_const, p.batch_ptr)
    return Assignment(values)


__all__ = [
    "BadLayout",
    "ChunkCircuit",
    "ChunkStatement",
    "ChunkWitness",
    "LayoutMismatch",
    "NUM_PUBLIC",
    "assign",
    "compile_chunk_circuit",
]

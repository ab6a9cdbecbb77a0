"""Goldilocks field layer: scalar helpers, NTT domains, challenge expansion.

Field elements are canonical integers in [0, PRIME), held as python ints for
scalar work and as uint64 numpy arrays for bulk work.  PRIME = 2^64 - 2^32 + 1
keeps every element in one machine word and gives power-of-two subgroups up
to 2^32, which is what the encoding domains of the sound backend use.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..kernels import (
    GL_GENERATOR,
    GL_PRIME,
    gl_add,
    gl_mul,
    gl_sub,
    ntt_rows,
)

PRIME = GL_PRIME
GENERATOR = GL_GENERATOR
TWO_ADICITY = 32


def add(a: int, b: int) -> int:
    return (a + b) % PRIME


def sub(a: int, b: int) -> int:
    return (a - b) % PRIME


def mul(a: int, b: int) -> int:
    return (a * b) % PRIME


def inv(a: int) -> int:
    if a % PRIME == 0:
        raise ZeroDivisionError("no inverse for 0")
    return pow(a, -1, PRIME)


def exp(a: int, e: int) -> int:
    return pow(a, e, PRIME)


def root_of_unity(n: int) -> int:
    """Generator of the order-n subgroup; n must be a power of two <= 2^32."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"domain size {n} is not a power of two")
    if n > 1 << TWO_ADICITY:
        raise ValueError(f"domain size {n} exceeds 2-adicity")
    return pow(GENERATOR, (PRIME - 1) // n, PRIME)


class _Domain:
    """Cached NTT data for one power-of-two size."""

    def __init__(self, n: int):
        self.n = n
        root = root_of_unity(n)
        fwd = np.empty(max(n // 2, 1), dtype=np.uint64)
        bwd = np.empty(max(n // 2, 1), dtype=np.uint64)
        w = 1
        wi = inv(root)
        v = 1
        for i in range(max(n // 2, 1)):
            fwd[i] = w
            bwd[i] = v
            w = w * root % PRIME
            v = v * wi % PRIME
        self.twiddles = fwd
        self.inv_twiddles = bwd
        self.n_inv = np.uint64(inv(n))
        bits = n.bit_length() - 1
        perm = np.arange(n, dtype=np.int64)
        rev = np.zeros(n, dtype=np.int64)
        for i in range(n):
            rev[i] = int(format(i, f"0{bits}b")[::-1], 2) if bits else 0
        self.perm = rev if bits else perm


_domains: dict[int, _Domain] = {}


def _domain(n: int) -> _Domain:
    d = _domains.get(n)
    if d is None:
        d = _Domain(n)
        _domains[n] = d
    return d


def ntt(mat: np.ndarray) -> np.ndarray:
    """Forward NTT along the last axis; index j maps to evaluation at root^j."""
    mat = np.atleast_2d(np.asarray(mat, dtype=np.uint64))
    d = _domain(mat.shape[-1])
    return ntt_rows(mat, d.twiddles, d.perm)


def intt(mat: np.ndarray) -> np.ndarray:
    """Inverse NTT along the last axis."""
    mat = np.atleast_2d(np.asarray(mat, dtype=np.uint64))
    d = _domain(mat.shape[-1])
    out = ntt_rows(mat, d.inv_twiddles, d.perm)
    return gl_mul(out, np.broadcast_to(d.n_inv, out.shape).copy())


def coset_powers(offset: int, n: int) -> np.ndarray:
    """offset^0 .. offset^(n-1) as uint64."""
    out = np.empty(n, dtype=np.uint64)
    w = 1
    for i in range(n):
        out[i] = w
        w = w * offset % PRIME
    return out


def evaluate_poly(coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Horner evaluation of one polynomial at many points."""
    coeffs = np.asarray(coeffs, dtype=np.uint64)
    points = np.asarray(points, dtype=np.uint64)
    acc = np.zeros_like(points)
    for c in coeffs[::-1]:
        acc = gl_add(gl_mul(acc, points), np.broadcast_to(np.uint64(c), points.shape).copy())
    return acc


def sum_mod(mat: np.ndarray, axis: int = 0) -> np.ndarray:
    """Modular sum along an axis; exact for up to 2^21 addends per lane."""
    mat = np.asarray(mat, dtype=np.uint64)
    lo = (mat & np.uint64(0xFFFFFFFF)).astype(np.int64).sum(axis=axis)
    hi = (mat >> np.uint64(32)).astype(np.int64).sum(axis=axis)
    # partial sums stay below 2^53 < PRIME, so only the 2^32 weight reduces
    return gl_add(np.asarray(lo, dtype=np.uint64),
                  gl_mul(np.asarray(hi, dtype=np.uint64), np.uint64(1) << np.uint64(32)))


def dot_mod(a: np.ndarray, b: np.ndarray) -> int:
    return int(sum_mod(gl_mul(np.asarray(a, dtype=np.uint64),
                              np.asarray(b, dtype=np.uint64))))


def expand_challenge(seed: bytes, count: int) -> np.ndarray:
    """Deterministic field elements from a seed via SHAKE-256.

    Raw 64-bit words are reduced mod PRIME; the bias is below 2^-32 per
    element, which is fine for challenge sampling.
    """
    raw = hashlib.shake_256(seed).digest(8 * count)
    words = np.frombuffer(raw, dtype="<u8")
    return (words % np.uint64(PRIME)).astype(np.uint64)


def expand_indices(seed: bytes, count: int, bound: int) -> list[int]:
    """`count` distinct indices below `bound`, deterministic in the seed."""
    if count > bound:
        raise ValueError("cannot sample more distinct indices than the bound")
    out: list[int] = []
    seen: set[int] = set()
    counter = 0
    while len(out) < count:
        raw = hashlib.shake_256(seed + counter.to_bytes(4, "big")).digest(8 * count)
        for k in range(count):
            j = int.from_bytes(raw[8 * k: 8 * k + 8], "little") % bound
            if j not in seen:
                seen.add(j)
                out.append(j)
                if len(out) == count:
                    break
        counter += 1
    return out


__all__ = [
    "PRIME", "GENERATOR", "TWO_ADICITY",
    "add", "sub", "mul", "inv", "exp",
    "root_of_unity", "ntt", "intt", "coset_powers", "evaluate_poly",
    "sum_mod", "dot_mod", "expand_challenge", "expand_indices",
    "gl_add", "gl_sub", "gl_mul",
]

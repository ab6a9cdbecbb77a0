"""Hot numeric kernels with numba and pure-numpy twins.

Everything performance critical lives here: Goldilocks field arithmetic,
number-theoretic transforms, segmented/scattered modular sums for sparse
matrices, the SHA-256 compression loop, and the witness-program interpreter
used to fill circuit assignments.

Each kernel exists twice: a vectorised numpy implementation and, when numba
is importable, an @njit twin.  One of the two is bound to the public names
at import time:

    ZKREDACT_KERNELS=numpy    force the pure-numpy fallback
    ZKREDACT_KERNELS=numba    require numba, fail loudly if missing
    unset or "auto"           use numba when available

Both implementations stay importable (`numpy_impl`, `numba_impl`) so the
benchmark suite can compare them in one process.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

# Goldilocks prime: 2^64 - 2^32 + 1.  Multiplicative group has 2-adicity 32,
# so power-of-two NTT domains up to 2^32 exist.  2^64 = EPSILON (mod PRIME).
GL_PRIME = 0xFFFFFFFF00000001
GL_EPSILON = 0xFFFFFFFF
GL_GENERATOR = 7

_P = np.uint64(GL_PRIME)
_EPS = np.uint64(GL_EPSILON)
_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)

# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _add_np(a, b):
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    s = a + b
    # wraparound past 2^64 is congruent to adding EPSILON
    s = np.where(s < a, s + _EPS, s)
    return np.where(s >= _P, s - _P, s)


def _sub_np(a, b):
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    d = a - b
    # borrow past zero is congruent to subtracting EPSILON
    return np.where(a < b, d - _EPS, d)


def _mul_np(a, b):
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    a0 = a & _M32
    a1 = a >> _S32
    b0 = b & _M32
    b1 = b >> _S32
    t00 = a0 * b0
    t01 = a0 * b1
    t10 = a1 * b0
    mid = (t00 >> _S32) + (t01 & _M32) + (t10 & _M32)
    lo = (t00 & _M32) | ((mid & _M32) << _S32)
    hi = a1 * b1 + (t01 >> _S32) + (t10 >> _S32) + (mid >> _S32)
    # reduce hi*2^64 + lo using 2^64 = 2^32 - 1 and 2^96 = -1 (mod PRIME)
    hi_hi = hi >> _S32
    hi_lo = hi & _M32
    t0 = lo - hi_hi
    t0 = np.where(lo < hi_hi, t0 - _EPS, t0)
    t1 = (hi_lo << _S32) - hi_lo
    res = t0 + t1
    res = np.where(res < t1, res + _EPS, res)
    return np.where(res >= _P, res - _P, res)


def _ntt_np(mat, twiddles, perm):
    """Radix-2 NTT along the last axis of a 2-D array.

    `twiddles` holds the n/2 powers of the order-n root, `perm` the
    bit-reversal permutation.  Returns a new array.
    """
    mat = np.ascontiguousarray(mat[:, perm])
    rows, n = mat.shape
    half = 1
    while half < n:
        step = (n // 2) // half
        view = mat.reshape(rows, n // (2 * half), 2, half)
        u = view[:, :, 0, :]
        tw = twiddles[: half * step : step]
        t = _mul_np(view[:, :, 1, :], tw[None, None, :])
        view[:, :, 0, :] = _add_np(u, t)
        view[:, :, 1, :] = _sub_np(u, t)
        half *= 2
    return mat


def _segment_sum_np(values, indptr):
    """Per-segment sums mod PRIME; segment i is values[indptr[i]:indptr[i+1]]."""
    lo = (values & _M32).astype(np.int64)
    hi = (values >> _S32).astype(np.int64)
    clo = np.concatenate(([0], np.cumsum(lo)))
    chi = np.concatenate(([0], np.cumsum(hi)))
    slo = (clo[indptr[1:]] - clo[indptr[:-1]]).astype(np.uint64)
    shi = (chi[indptr[1:]] - chi[indptr[:-1]]).astype(np.uint64)
    # partial sums stay below 2^53 (< PRIME), so only the 2^32 weight reduces
    return _add_np(slo, _mul_np(shi, np.uint64(1) << _S32))


def _scatter_sum_np(values, idx, size):
    """out[idx[k]] += values[k] (mod PRIME) with out of the given size."""
    lo = np.bincount(idx, weights=(values & _M32).astype(np.float64), minlength=size)
    hi = np.bincount(idx, weights=(values >> _S32).astype(np.float64), minlength=size)
    lo = lo.astype(np.uint64)
    hi = hi.astype(np.uint64)
    return _add_np(lo, _mul_np(hi, np.uint64(1) << _S32))


# SHA-256 round constants and initial state (FIPS 180-4).
SHA_K = np.array(
    [
        0x428A2F98, 0x71374491, 0xB5C0FBCF, 0xE9B5DBA5, 0x3956C25B, 0x59F111F1,
        0x923F82A4, 0xAB1C5ED5, 0xD807AA98, 0x12835B01, 0x243185BE, 0x550C7DC3,
        0x72BE5D74, 0x80DEB1FE, 0x9BDC06A7, 0xC19BF174, 0xE49B69C1, 0xEFBE4786,
        0x0FC19DC6, 0x240CA1CC, 0x2DE92C6F, 0x4A7484AA, 0x5CB0A9DC, 0x76F988DA,
        0x983E5152, 0xA831C66D, 0xB00327C8, 0xBF597FC7, 0xC6E00BF3, 0xD5A79147,
        0x06CA6351, 0x14292967, 0x27B70A85, 0x2E1B2138, 0x4D2C6DFC, 0x53380D13,
        0x650A7354, 0x766A0ABB, 0x81C2C92E, 0x92722C85, 0xA2BFE8A1, 0xA81A664B,
        0xC24B8B70, 0xC76C51A3, 0xD192E819, 0xD6990624, 0xF40E3585, 0x106AA070,
        0x19A4C116, 0x1E376C08, 0x2748774C, 0x34B0BCB5, 0x391C0CB3, 0x4ED8AA4A,
        0x5B9CCA4F, 0x682E6FF3, 0x748F82EE, 0x78A5636F, 0x84C87814, 0x8CC70208,
        0x90BEFFFA, 0xA4506CEB, 0xBEF9A3F7, 0xC67178F2,
    ],
    dtype=np.uint32,
)

SHA_IV = np.array(
    [0x6A09E667, 0xBB67AE85, 0x3C6EF372, 0xA54FF53A,
     0x510E527F, 0x9B05688C, 0x1F83D9AB, 0x5BE0CD19],
    dtype=np.uint32,
)

_MASK32 = 0xFFFFFFFF


def _sha_compress_np(blocks, state0):
    """Run the compression function over (m, 16) big-endian words.

    Returns an (m+1, 8) uint32 array of chaining states, states[0] == state0.
    """
    blocks = np.asarray(blocks, dtype=np.uint32)
    m = blocks.shape[0]
    states = np.empty((m + 1, 8), dtype=np.uint32)
    states[0] = state0
    if m == 0:
        return states

    def rotr(x, r):
        return (x >> np.uint32(r)) | (x << np.uint32(32 - r))

    # message schedule vectorised across all chunks at once
    w = np.zeros((m, 64), dtype=np.uint32)
    w[:, :16] = blocks
    for t in range(16, 64):
        s0 = rotr(w[:, t - 15], 7) ^ rotr(w[:, t - 15], 18) ^ (w[:, t - 15] >> np.uint32(3))
        s1 = rotr(w[:, t - 2], 17) ^ rotr(w[:, t - 2], 19) ^ (w[:, t - 2] >> np.uint32(10))
        w[:, t] = w[:, t - 16] + s0 + w[:, t - 7] + s1

    k = [int(x) for x in SHA_K]
    st = [int(x) for x in state0]
    for i in range(m):
        wi = w[i].tolist()
        a, b, c, d, e, f, g, h = st
        for t in range(64):
            s1 = (((e >> 6) | (e << 26)) ^ ((e >> 11) | (e << 21)) ^ ((e >> 25) | (e << 7))) & _MASK32
            ch = (e & f) ^ (~e & g)
            t1 = (h + s1 + (ch & _MASK32) + k[t] + wi[t]) & _MASK32
            s0 = (((a >> 2) | (a << 30)) ^ ((a >> 13) | (a << 19)) ^ ((a >> 22) | (a << 10))) & _MASK32
            maj = (a & b) ^ (a & c) ^ (b & c)
            t2 = (s0 + maj) & _MASK32
            h, g, f, e, d, c, b, a = g, f, e, (d + t1) & _MASK32, c, b, a, (t1 + t2) & _MASK32
        st = [(x + y) & _MASK32 for x, y in zip(st, (a, b, c, d, e, f, g, h))]
        states[i + 1] = st
    return states


STEP_MUL = 0
STEP_BITS = 1


def _run_program_np(values, kinds, out_ptr, out_idx, widths,
                    a_ptr, a_wire, a_coef, a_const,
                    b_ptr, b_wire, b_coef, b_const, batch_ptr):
    """Replay a levelized witness program, filling `values` in place.

    Batches group independent steps of the same kind so each batch runs as a
    handful of vectorised ops.  The per-step layout matches the numba twin.
    """
    for bi in range(len(batch_ptr) - 1):
        lo, hi = int(batch_ptr[bi]), int(batch_ptr[bi + 1])
        steps = np.arange(lo, hi)
        acc_a = _segment_sum_np(
            _mul_np(a_coef[a_ptr[lo]:a_ptr[hi]], values[a_wire[a_ptr[lo]:a_ptr[hi]]]),
            a_ptr[lo:hi + 1] - a_ptr[lo])
        acc_a = _add_np(acc_a, a_const[steps])
        if kinds[lo] == STEP_MUL:
            acc_b = _segment_sum_np(
                _mul_np(b_coef[b_ptr[lo]:b_ptr[hi]], values[b_wire[b_ptr[lo]:b_ptr[hi]]]),
                b_ptr[lo:hi + 1] - b_ptr[lo])
            acc_b = _add_np(acc_b, b_const[steps])
            values[out_idx[out_ptr[lo]:out_ptr[hi]]] = _mul_np(acc_a, acc_b)
        else:
            wmax = int(widths[lo:hi].max())
            bits = (acc_a[:, None] >> np.arange(wmax, dtype=np.uint64)[None, :]) & np.uint64(1)
            keep = np.arange(wmax)[None, :] < widths[lo:hi, None]
            values[out_idx[out_ptr[lo]:out_ptr[hi]]] = bits[keep]
    return values


numpy_impl = SimpleNamespace(
    name="numpy",
    add=_add_np,
    sub=_sub_np,
    mul=_mul_np,
    ntt=_ntt_np,
    segment_sum=_segment_sum_np,
    scatter_sum=_scatter_sum_np,
    sha_compress=_sha_compress_np,
    run_program=_run_program_np,
)

# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------


def _build_numba_impl():
    import numba
    from numba import njit, vectorize

    u64 = numba.uint64

    @njit(u64(u64, u64), cache=True, inline="always")
    def add_s(a, b):
        s = a + b
        if s < a:
            s += _EPS
        if s >= _P:
            s -= _P
        return s

    @njit(u64(u64, u64), cache=True, inline="always")
    def sub_s(a, b):
        d = a - b
        if a < b:
            d -= _EPS
        return d

    @njit(u64(u64, u64), cache=True, inline="always")
    def mul_s(a, b):
        a0 = a & _M32
        a1 = a >> _S32
        b0 = b & _M32
        b1 = b >> _S32
        t00 = a0 * b0
        t01 = a0 * b1
        t10 = a1 * b0
        mid = (t00 >> _S32) + (t01 & _M32) + (t10 & _M32)
        lo = (t00 & _M32) | ((mid & _M32) << _S32)
        hi = a1 * b1 + (t01 >> _S32) + (t10 >> _S32) + (mid >> _S32)
        hi_hi = hi >> _S32
        hi_lo = hi & _M32
        t0 = lo - hi_hi
        if lo < hi_hi:
            t0 -= _EPS
        t1 = (hi_lo << _S32) - hi_lo
        res = t0 + t1
        if res < t1:
            res += _EPS
        if res >= _P:
            res -= _P
        return res

    @vectorize(["uint64(uint64, uint64)"], cache=True)
    def add_v(a, b):
        return add_s(a, b)

    @vectorize(["uint64(uint64, uint64)"], cache=True)
    def sub_v(a, b):
        return sub_s(a, b)

    @vectorize(["uint64(uint64, uint64)"], cache=True)
    def mul_v(a, b):
        return mul_s(a, b)

    @njit(cache=True)
    def ntt(mat, twiddles, perm):
        rows, n = mat.shape
        out = np.empty_like(mat)
        for r in range(rows):
            for i in range(n):
                out[r, i] = mat[r, perm[i]]
            half = 1
            while half < n:
                step = (n // 2) // half
                for start in range(0, n, 2 * half):
                    for k in range(half):
                        u = out[r, start + k]
                        t = mul_s(out[r, start + k + half], twiddles[k * step])
                        out[r, start + k] = add_s(u, t)
                        out[r, start + k + half] = sub_s(u, t)
                half *= 2
        return out

    @njit(cache=True)
    def segment_sum(values, indptr):
        nseg = len(indptr) - 1
        out = np.zeros(nseg, dtype=np.uint64)
        for i in range(nseg):
            acc = np.uint64(0)
            for k in range(indptr[i], indptr[i + 1]):
                acc = add_s(acc, values[k])
            out[i] = acc
        return out

    @njit(cache=True)
    def scatter_sum(values, idx, size):
        out = np.zeros(size, dtype=np.uint64)
        for k in range(len(values)):
            j = idx[k]
            out[j] = add_s(out[j], values[k])
        return out

    mask32 = np.uint64(0xFFFFFFFF)

    @njit(u64(u64, u64), cache=True, inline="always")
    def rotr32(x, r):
        return ((x >> r) | (x << (np.uint64(32) - r))) & mask32

    @njit(cache=True)
    def sha_compress(blocks, state0):
        # 32-bit words carried in uint64 locals with explicit masking to
        # avoid integer promotion surprises
        m = blocks.shape[0]
        states = np.empty((m + 1, 8), dtype=np.uint32)
        for j in range(8):
            states[0, j] = state0[j]
        w = np.empty(64, dtype=np.uint64)
        for i in range(m):
            for t in range(16):
                w[t] = np.uint64(blocks[i, t])
            for t in range(16, 64):
                x = w[t - 15]
                s0 = rotr32(x, np.uint64(7)) ^ rotr32(x, np.uint64(18)) ^ (x >> np.uint64(3))
                y = w[t - 2]
                s1 = rotr32(y, np.uint64(17)) ^ rotr32(y, np.uint64(19)) ^ (y >> np.uint64(10))
                w[t] = (w[t - 16] + s0 + w[t - 7] + s1) & mask32
            a = np.uint64(states[i, 0])
            b = np.uint64(states[i, 1])
            c = np.uint64(states[i, 2])
            d = np.uint64(states[i, 3])
            e = np.uint64(states[i, 4])
            f = np.uint64(states[i, 5])
            g = np.uint64(states[i, 6])
            h = np.uint64(states[i, 7])
            for t in range(64):
                s1 = rotr32(e, np.uint64(6)) ^ rotr32(e, np.uint64(11)) ^ rotr32(e, np.uint64(25))
                ch = (e & f) ^ ((e ^ mask32) & g)
                t1 = (h + s1 + ch + np.uint64(SHA_K[t]) + w[t]) & mask32
                s0 = rotr32(a, np.uint64(2)) ^ rotr32(a, np.uint64(13)) ^ rotr32(a, np.uint64(22))
                maj = (a & b) ^ (a & c) ^ (b & c)
                t2 = (s0 + maj) & mask32
                h = g
                g = f
                f = e
                e = (d + t1) & mask32
                d = c
                c = b
                b = a
                a = (t1 + t2) & mask32
            states[i + 1, 0] = np.uint32((np.uint64(states[i, 0]) + a) & mask32)
            states[i + 1, 1] = np.uint32((np.uint64(states[i, 1]) + b) & mask32)
            states[i + 1, 2] = np.uint32((np.uint64(states[i, 2]) + c) & mask32)
            states[i + 1, 3] = np.uint32((np.uint64(states[i, 3]) + d) & mask32)
            states[i + 1, 4] = np.uint32((np.uint64(states[i, 4]) + e) & mask32)
            states[i + 1, 5] = np.uint32((np.uint64(states[i, 5]) + f) & mask32)
            states[i + 1, 6] = np.uint32((np.uint64(states[i, 6]) + g) & mask32)
            states[i + 1, 7] = np.uint32((np.uint64(states[i, 7]) + h) & mask32)
        return states

    @njit(cache=True)
    def run_program(values, kinds, out_ptr, out_idx, widths,
                    a_ptr, a_wire, a_coef, a_const,
                    b_ptr, b_wire, b_coef, b_const, batch_ptr):
        for s in range(len(kinds)):
            acc_a = a_const[s]
            for k in range(a_ptr[s], a_ptr[s + 1]):
                acc_a = add_s(acc_a, mul_s(a_coef[k], values[a_wire[k]]))
            if kinds[s] == STEP_MUL:
                acc_b = b_const[s]
                for k in range(b_ptr[s], b_ptr[s + 1]):
                    acc_b = add_s(acc_b, mul_s(b_coef[k], values[b_wire[k]]))
                values[out_idx[out_ptr[s]]] = mul_s(acc_a, acc_b)
            else:
                for j in range(widths[s]):
                    values[out_idx[out_ptr[s] + j]] = (acc_a >> np.uint64(j)) & np.uint64(1)
        return values

    return SimpleNamespace(
        name="numba",
        add=add_v,
        sub=sub_v,
        mul=mul_v,
        ntt=ntt,
        segment_sum=segment_sum,
        scatter_sum=scatter_sum,
        sha_compress=sha_compress,
        run_program=run_program,
    )


_mode = os.environ.get("ZKREDACT_KERNELS", "auto").lower()
numba_impl = None
if _mode not in ("numpy",):
    try:
        numba_impl = _build_numba_impl()
    except ImportError:
        if _mode == "numba":
            raise
        numba_impl = None

active_impl = numba_impl if numba_impl is not None else numpy_impl

gl_add = active_impl.add
gl_sub = active_impl.sub
gl_mul = active_impl.mul
ntt_rows = active_impl.ntt
segment_sum_mod = active_impl.segment_sum
scatter_sum_mod = active_impl.scatter_sum
sha_compress_blocks = active_impl.sha_compress
run_witness_program = active_impl.run_program

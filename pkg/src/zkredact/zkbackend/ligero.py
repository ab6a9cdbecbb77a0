"""Sound transparent backend: interleaved-code IOP made non-interactive.

The committed object is the matrix V whose rows (length L) tile the vector

    v = [ z | x | y | w ]      z  = full wire assignment
                               x  = A z,  y = B z,  w = C z  per constraint

Each row is interpolated over the order-L subgroup G, blinded with a random
multiple of (X^L - 1) so openings leak nothing about row values, and
evaluated over a disjoint multiplicative coset of size N.  Columns of the
evaluation matrix are committed in a salted Merkle tree.  Three tests bind
the commitment to the statement, each backed by spot checks at T random
columns:

    low degree    random row combination must be a degree < K polynomial
    linear        a random functional r of the affine system
                  [publics pinned; A z - x = 0; B z - y = 0; C z - w = 0]
                  is evaluated via the sum of r-weighted row products over
                  G, which must equal the public right-hand side
    quadratic     a random combination of (x_i * y_i - w_i) row products
                  must vanish on G, i.e. every constraint holds

Challenges come from a Fiat-Shamir transcript seeded with the circuit and
statement digests.  No trusted setup anywhere; security rests on SHA-256
and Reed-Solomon proximity.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from . import field
from .backend import (
    Proof,
    ProofBackend,
    VerifyResult,
    register_backend,
)
from .field import (
    GENERATOR,
    PRIME,
    gl_add,
    gl_mul,
    gl_sub,
)
from ..kernels import scatter_sum_mod
from .merkle import MerkleTree, leaf_hash, verify_path
from .r1cs import ConstraintSystem, products
from .transcript import Transcript

ROW_LEN = 512                 # L: payload values per row, message domain size
DOMAIN = 2048                 # N: evaluation domain size (coset of order-N group)
QUERIES = 64                  # T: opened columns
DEGREE = ROW_LEN + QUERIES + 8   # K: row polynomial degree bound
COSET = GENERATOR             # offset keeping the domain disjoint from G

_MAGIC = b"ZKLGRO01"
_TAG = b"zkredact-ligero-v1"
_PATH_LEN = DOMAIN.bit_length() - 1


@dataclass(frozen=True)
class _Dims:
    n_z: int
    m: int
    m_z: int
    m_q: int

    @property
    def m_v(self) -> int:
        return self.m_z + 3 * self.m_q

    @property
    def rows_total(self) -> int:
        return self.m_v + 3   # plus low-degree, linear, quadratic masks


def _dims(cs: ConstraintSystem) -> _Dims:
    m_z = -(-cs.num_wires // ROW_LEN)
    m_q = -(-cs.num_constraints // ROW_LEN) if cs.num_constraints else 1
    return _Dims(cs.num_wires, cs.num_constraints, m_z, m_q)


def _payload_rows(dims: _Dims, z, x, y, w) -> np.ndarray:
    rows = np.zeros((dims.m_v, ROW_LEN), dtype=np.uint64)
    flat = rows.reshape(-1)
    flat[:dims.n_z] = z
    base = dims.m_z * ROW_LEN
    step = dims.m_q * ROW_LEN
    flat[base:base + dims.m] = x
    flat[base + step:base + step + dims.m] = y
    flat[base + 2 * step:base + 2 * step + dims.m] = w
    return rows


def _coset_scale(coeffs: np.ndarray, inverse: bool = False) -> np.ndarray:
    n = coeffs.shape[-1]
    c = field.inv(COSET) if inverse else COSET
    return gl_mul(coeffs, field.coset_powers(c, n)[None, :])


def _encode(coeffs: np.ndarray) -> np.ndarray:
    """Evaluate degree < N polynomials (rows) over the size-N coset."""
    padded = np.zeros((coeffs.shape[0], DOMAIN), dtype=np.uint64)
    padded[:, :coeffs.shape[1]] = coeffs
    return field.ntt(_coset_scale(padded))


def _decode(evals: np.ndarray, keep: int) -> np.ndarray:
    """Inverse of _encode, truncated to `keep` coefficients."""
    coeffs = _coset_scale(field.intt(evals), inverse=True)
    return coeffs[:, :keep]


def _lincheck_rows(cs: ConstraintSystem, dims: _Dims, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows of the random linear functional, plus its public-side weights.

    The affine system has one row per public wire pin (constant one
    included) and one row per constraint and matrix.  Returns the weights
    folded onto payload positions, shaped like the payload rows, and the
    pin weights (needed for the right-hand side).
    """
    n_pins = cs.num_public + 1
    r_pins = r[:n_pins]
    r_a = r[n_pins:n_pins + dims.m]
    r_b = r[n_pins + dims.m:n_pins + 2 * dims.m]
    r_c = r[n_pins + 2 * dims.m:n_pins + 3 * dims.m]

    s = np.zeros(dims.m_v * ROW_LEN, dtype=np.uint64)
    s[:n_pins] = r_pins
    for mat, rv in ((cs.a, r_a), (cs.b, r_b), (cs.c, r_c)):
        row_of_term = np.repeat(np.arange(dims.m, dtype=np.int64),
                                np.diff(mat.indptr))
        terms = gl_mul(rv[row_of_term], mat.coeffs)
        s[:dims.n_z] = gl_add(s[:dims.n_z],
                              scatter_sum_mod(terms, mat.wires, dims.n_z))
    base = dims.m_z * ROW_LEN
    step = dims.m_q * ROW_LEN
    for off, rv in ((base, r_a), (base + step, r_b), (base + 2 * step, r_c)):
        s[off:off + dims.m] = gl_sub(s[off:off + dims.m], rv)
    return s.reshape(dims.m_v, ROW_LEN), r_pins


def _fold_mod_vanishing(coeffs: np.ndarray) -> np.ndarray:
    """Reduce a polynomial mod (X^L - 1): sum coefficient blocks of size L."""
    n = len(coeffs)
    pad = -n % ROW_LEN
    blocks = np.concatenate([coeffs, np.zeros(pad, dtype=np.uint64)]).reshape(-1, ROW_LEN)
    return field.sum_mod(blocks, axis=0)


def _expand_seed(seed: bytes, label: bytes, count: int) -> np.ndarray:
    return field.expand_challenge(hashlib.sha256(_TAG + label + seed).digest(), count)


def _column_bytes(evals: np.ndarray, j: int) -> bytes:
    return np.ascontiguousarray(evals[:, j]).astype("<u8").tobytes()


class _Layout:
    """Byte offsets of the serialized proof for given dims."""

    def __init__(self, dims: _Dims):
        self.dims = dims
        self.n_w = DEGREE
        self.n_q = DEGREE + ROW_LEN - 1
        self.n_p0 = 2 * DEGREE - 1
        self.col_vals = dims.rows_total
        self.per_query = 32 + 8 * self.col_vals + 32 * _PATH_LEN
        self.header = len(_MAGIC) + 7 * 4 + 32
        self.coeff_bytes = 8 * (self.n_w + self.n_q + self.n_p0)
        self.total = self.header + self.coeff_bytes + QUERIES * self.per_query

    def header_bytes(self, root: bytes) -> bytes:
        d = self.dims
        parts = [_MAGIC]
        for v in (d.m_v, d.m_z, d.m_q, ROW_LEN, DOMAIN, DEGREE, QUERIES):
            parts.append(v.to_bytes(4, "big"))
        parts.append(root)
        return b"".join(parts)


def _u64s(buf: bytes) -> np.ndarray:
    return np.frombuffer(buf, dtype="<u8").astype(np.uint64)


class SoundBackend(ProofBackend):
    backend_id = "sound"

    def prove(self, circuit, statement, witness, seed=None):
        assignment = self._check_witness(circuit, statement, witness)
        cs = circuit.cs
        dims = _dims(cs)
        lay = _Layout(dims)
        if seed is None:
            seed = os.urandom(32)

        z = assignment.values
        x, y, w = products(cs, assignment)
        rows = _payload_rows(dims, z, x, y, w)

        # interpolate rows over G and blind with multiples of (X^L - 1);
        # the blind degree exceeds the query count, so T openings of any
        # row are distributed independently of the payload
        row_coeffs = np.zeros((dims.m_v, DEGREE), dtype=np.uint64)
        row_coeffs[:, :ROW_LEN] = field.intt(rows)
        blind = _expand_seed(seed, b"blind", dims.m_v * (DEGREE - ROW_LEN))
        blind = blind.reshape(dims.m_v, DEGREE - ROW_LEN)
        row_coeffs[:, ROW_LEN:] = gl_add(row_coeffs[:, ROW_LEN:], blind)
        row_coeffs[:, :DEGREE - ROW_LEN] = gl_sub(
            row_coeffs[:, :DEGREE - ROW_LEN], blind)

        mask_ld = _expand_seed(seed, b"mask-low-degree", DEGREE)
        mask_lin = _expand_seed(seed, b"mask-linear", DEGREE + ROW_LEN - 1)
        # the linear mask must not shift the sum over G, which only the
        # coefficients at exponents divisible by L contribute to
        wrap = mask_lin[ROW_LEN::ROW_LEN]
        mask_lin[0] = np.uint64(PRIME - int(field.sum_mod(wrap))) % np.uint64(PRIME)
        quad_rand = _expand_seed(seed, b"mask-quadratic", 2 * DEGREE - 1 - ROW_LEN)
        mask_quad = np.zeros(2 * DEGREE - 1, dtype=np.uint64)
        mask_quad[ROW_LEN:] = quad_rand
        mask_quad[:len(quad_rand)] = gl_sub(mask_quad[:len(quad_rand)], quad_rand)

        evals = np.vstack([
            _encode(row_coeffs),
            _encode(mask_ld[None, :]),
            _encode(mask_lin[None, :]),
            _encode(mask_quad[None, :]),
        ])

        master_salt = hashlib.sha256(_TAG + b"salt" + seed).digest()
        salts = [hashlib.sha256(master_salt + j.to_bytes(4, "big")).digest()
                 for j in range(DOMAIN)]
        tree = MerkleTree([leaf_hash(salts[j], _column_bytes(evals, j))
                           for j in range(DOMAIN)])

        tr = Transcript(_TAG)
        tr.absorb(b"circuit", cs.digest())
        tr.absorb(b"statement", statement.digest())
        tr.absorb(b"root", tree.root)

        # low-degree test: random combination of data rows plus its mask
        alpha = tr.challenge_fields(b"alpha", dims.m_v)
        w_coeffs = gl_add(mask_ld,
                          field.sum_mod(gl_mul(row_coeffs, alpha[:, None]), axis=0))
        tr.absorb(b"w-poly", w_coeffs.astype("<u8").tobytes())

        # linear test: q = mask + sum_i r_i(X) * p_i(X)
        r = tr.challenge_fields(b"linear", cs.num_public + 1 + 3 * dims.m)
        s_rows, _ = _lincheck_rows(cs, dims, r)
        r_evals = _encode(field.intt(s_rows))
        q_evals = gl_add(evals[dims.m_v + 1],
                         field.sum_mod(gl_mul(r_evals, evals[:dims.m_v]), axis=0))
        q_coeffs = _decode(q_evals[None, :], DOMAIN)[0]
        assert not q_coeffs[lay.n_q:].any(), "internal: q degree overflow"
        q_coeffs = q_coeffs[:lay.n_q]
        tr.absorb(b"q-poly", q_coeffs.astype("<u8").tobytes())

        # quadratic test: p0 = mask + sum_i aq_i (px_i py_i - pw_i)
        aq = tr.challenge_fields(b"quad", dims.m_q)
        ex = evals[dims.m_z:dims.m_z + dims.m_q]
        ey = evals[dims.m_z + dims.m_q:dims.m_z + 2 * dims.m_q]
        ew = evals[dims.m_z + 2 * dims.m_q:dims.m_v]
        p0_evals = gl_add(
            evals[dims.m_v + 2],
            field.sum_mod(gl_mul(aq[:, None], gl_sub(gl_mul(ex, ey), ew)), axis=0))
        p0_coeffs = _decode(p0_evals[None, :], DOMAIN)[0]
        assert not p0_coeffs[lay.n_p0:].any(), "internal: p0 degree overflow"
        p0_coeffs = p0_coeffs[:lay.n_p0]
        tr.absorb(b"p0-poly", p0_coeffs.astype("<u8").tobytes())

        queries = tr.challenge_indices(b"queries", QUERIES, DOMAIN)

        parts = [lay.header_bytes(tree.root),
                 w_coeffs.astype("<u8").tobytes(),
                 q_coeffs.astype("<u8").tobytes(),
                 p0_coeffs.astype("<u8").tobytes()]
        for j in queries:
            parts.append(salts[j])
            parts.append(_column_bytes(evals, j))
            parts.extend(tree.path(j))
        data = b"".join(parts)
        assert len(data) == lay.total
        return Proof(self.backend_id, data)

    def verify(self, circuit, statement, proof):
        try:
            return self._verify(circuit, statement, proof)
        except Exception as exc:
            return VerifyResult(False, f"malformed proof: {exc}")

    def _verify(self, circuit, statement, proof):
        if proof.backend_id != self.backend_id:
            return VerifyResult(False, f"proof built for backend {proof.backend_id!r}")
        cs = circuit.cs
        dims = _dims(cs)
        lay = _Layout(dims)
        data = proof.data
        if len(data) != lay.total:
            return VerifyResult(False, "proof length mismatch")

        off = len(_MAGIC)
        if data[:off] != _MAGIC:
            return VerifyResult(False, "bad magic")
        head = []
        for _ in range(7):
            head.append(int.from_bytes(data[off:off + 4], "big"))
            off += 4
        if head != [dims.m_v, dims.m_z, dims.m_q, ROW_LEN, DOMAIN, DEGREE, QUERIES]:
            return VerifyResult(False, "dimension header mismatch")
        root = data[off:off + 32]
        off += 32

        def take_u64(n):
            nonlocal off
            arr = _u64s(data[off:off + 8 * n])
            off += 8 * n
            if (arr >= np.uint64(PRIME)).any():
                raise ValueError("non-canonical field element")
            return arr

        w_coeffs = take_u64(lay.n_w)
        q_coeffs = take_u64(lay.n_q)
        p0_coeffs = take_u64(lay.n_p0)

        opened = []
        for _ in range(QUERIES):
            salt = data[off:off + 32]
            off += 32
            col_bytes = data[off:off + 8 * lay.col_vals]
            col = _u64s(col_bytes)
            off += 8 * lay.col_vals
            if (col >= np.uint64(PRIME)).any():
                raise ValueError("non-canonical column value")
            path = [data[off + 32 * i:off + 32 * (i + 1)] for i in range(_PATH_LEN)]
            off += 32 * _PATH_LEN
            opened.append((salt, col_bytes, col, path))

        tr = Transcript(_TAG)
        tr.absorb(b"circuit", cs.digest())
        tr.absorb(b"statement", statement.digest())
        tr.absorb(b"root", root)
        alpha = tr.challenge_fields(b"alpha", dims.m_v)
        tr.absorb(b"w-poly", data[lay.header:lay.header + 8 * lay.n_w])
        r = tr.challenge_fields(b"linear", cs.num_public + 1 + 3 * dims.m)
        tr.absorb(b"q-poly",
                  data[lay.header + 8 * lay.n_w:lay.header + 8 * (lay.n_w + lay.n_q)])
        aq = tr.challenge_fields(b"quad", dims.m_q)
        tr.absorb(b"p0-poly",
                  data[lay.header + 8 * (lay.n_w + lay.n_q):lay.header + lay.coeff_bytes])
        queries = tr.challenge_indices(b"queries", QUERIES, DOMAIN)

        # global checks: the linear sum over G matches the public side, and
        # the quadratic combination vanishes identically on G
        pub = np.concatenate([[np.uint64(1)],
                              circuit.public_input(statement)]).astype(np.uint64)
        rhs = field.dot_mod(r[:cs.num_public + 1], pub)
        lhs = field.mul(ROW_LEN, int(field.sum_mod(q_coeffs[::ROW_LEN])))
        if lhs != rhs:
            return VerifyResult(False, "linear test: sum over message domain")
        if _fold_mod_vanishing(p0_coeffs).any():
            return VerifyResult(False, "quadratic test: nonzero on message domain")

        # spot checks at the queried columns
        s_rows, _ = _lincheck_rows(cs, dims, r)
        r_evals = _encode(field.intt(s_rows))

        root_n = field.root_of_unity(DOMAIN)
        etas = np.array([field.mul(COSET, field.exp(root_n, j)) for j in queries],
                        dtype=np.uint64)
        w_at = field.evaluate_poly(w_coeffs, etas)
        q_at = field.evaluate_poly(q_coeffs, etas)
        p0_at = field.evaluate_poly(p0_coeffs, etas)

        for qi, ((salt, col_bytes, col, path), j) in enumerate(zip(opened, queries)):
            if not verify_path(root, j, leaf_hash(salt, col_bytes), path):
                return VerifyResult(False, "column opening: bad merkle path")
            dcol = col[:dims.m_v]
            if int(w_at[qi]) != field.add(int(col[dims.m_v]),
                                          field.dot_mod(alpha, dcol)):
                return VerifyResult(False, "low-degree test: column mismatch")
            if int(q_at[qi]) != field.add(int(col[dims.m_v + 1]),
                                          field.dot_mod(r_evals[:, j], dcol)):
                return VerifyResult(False, "linear test: column mismatch")
            cx = dcol[dims.m_z:dims.m_z + dims.m_q]
            cy = dcol[dims.m_z + dims.m_q:dims.m_z + 2 * dims.m_q]
            cw = dcol[dims.m_z + 2 * dims.m_q:]
            want_p0 = field.add(int(col[dims.m_v + 2]),
                                field.dot_mod(aq, gl_sub(gl_mul(cx, cy), cw)))
            if int(p0_at[qi]) != want_p0:
                return VerifyResult(False, "quadratic test: column mismatch")
        return VerifyResult(True)


register_backend(SoundBackend())

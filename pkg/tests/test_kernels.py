"""Both kernel implementations against plain-integer oracles and each other."""

import hashlib
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zkredact import kernels
from zkredact.kernels import GL_PRIME, numba_impl, numpy_impl

IMPLS = [pytest.param(numpy_impl, id="numpy")]
if numba_impl is not None:
    IMPLS.append(pytest.param(numba_impl, id="numba"))

EDGE = [0, 1, 2, GL_PRIME - 1, GL_PRIME - 2, 2**32, 2**32 - 1, 2**32 + 1,
        2**63, GL_PRIME - 2**32]
u64 = st.integers(min_value=0, max_value=GL_PRIME - 1)


def as_arr(values):
    return np.array(values, dtype=np.uint64)


@pytest.mark.parametrize("impl", IMPLS)
def test_field_ops_edge_cases(impl):
    for a in EDGE:
        for b in EDGE:
            aa, bb = as_arr([a]), as_arr([b])
            assert int(impl.add(aa, bb)[0]) == (a + b) % GL_PRIME
            assert int(impl.sub(aa, bb)[0]) == (a - b) % GL_PRIME
            assert int(impl.mul(aa, bb)[0]) == (a * b) % GL_PRIME


@pytest.mark.parametrize("impl", IMPLS)
@given(st.lists(st.tuples(u64, u64), min_size=1, max_size=50))
def test_field_ops_random(impl, pairs):
    a = as_arr([p[0] for p in pairs])
    b = as_arr([p[1] for p in pairs])
    assert [int(x) for x in impl.add(a, b)] == [(x + y) % GL_PRIME for x, y in pairs]
    assert [int(x) for x in impl.sub(a, b)] == [(x - y) % GL_PRIME for x, y in pairs]
    assert [int(x) for x in impl.mul(a, b)] == [(x * y) % GL_PRIME for x, y in pairs]


def test_impls_agree_on_random_ops():
    if numba_impl is None:
        pytest.skip("numba unavailable")
    r = np.random.default_rng(1)
    a = r.integers(0, GL_PRIME, size=4096, dtype=np.uint64)
    b = r.integers(0, GL_PRIME, size=4096, dtype=np.uint64)
    for op in ("add", "sub", "mul"):
        np.testing.assert_array_equal(getattr(numpy_impl, op)(a, b),
                                      getattr(numba_impl, op)(a, b))


@pytest.mark.parametrize("impl", IMPLS)
def test_segment_sum_oracle(impl, rng):
    values = [rng.randrange(GL_PRIME) for _ in range(200)]
    cuts = sorted(rng.sample(range(201), 9))
    indptr = [0] + cuts + [200]
    out = impl.segment_sum(as_arr(values), np.array(indptr, dtype=np.int64))
    expect = [sum(values[indptr[i]:indptr[i + 1]]) % GL_PRIME
              for i in range(len(indptr) - 1)]
    assert [int(x) for x in out] == expect


@pytest.mark.parametrize("impl", IMPLS)
def test_scatter_sum_oracle(impl, rng):
    values = [rng.randrange(GL_PRIME) for _ in range(500)]
    idx = [rng.randrange(37) for _ in range(500)]
    out = impl.scatter_sum(as_arr(values), np.array(idx, dtype=np.int64), 37)
    expect = [0] * 37
    for v, i in zip(values, idx):
        expect[i] = (expect[i] + v) % GL_PRIME
    assert [int(x) for x in out] == expect


@pytest.mark.parametrize("impl", IMPLS)
@pytest.mark.parametrize("length", [0, 1, 55, 56, 63, 64, 65, 119, 128, 1000])
def test_sha_compress_matches_hashlib(impl, length):
    msg = bytes((7 * i + length) % 256 for i in range(length))
    padded = (msg + b"\x80" + b"\x00" * ((55 - length) % 64)
              + (8 * length).to_bytes(8, "big"))
    blocks = np.frombuffer(padded, dtype=">u4").reshape(-1, 16).astype(np.uint32)
    iv = kernels.SHA_IV.copy()
    states = impl.sha_compress(blocks, iv)
    digest = b"".join(int(w).to_bytes(4, "big") for w in states[-1])
    assert digest == hashlib.sha256(msg).digest()
    assert states.shape == (blocks.shape[0] + 1, 8)
    assert [int(w) for w in states[0]] == [int(w) for w in kernels.SHA_IV]


def test_active_impl_honors_env_flag():
    mode = kernels._mode
    assert mode in ("auto", "numpy", "numba")
    if mode == "numpy":
        assert kernels.active_impl is numpy_impl
    elif mode == "numba":
        assert kernels.active_impl is numba_impl


def test_public_bindings_point_at_active_impl():
    assert kernels.gl_add is kernels.active_impl.add
    assert kernels.sha_compress_blocks is kernels.active_impl.sha_compress
    assert kernels.run_witness_program is kernels.active_impl.run_program

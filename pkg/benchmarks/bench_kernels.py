"""Side-by-side timing of the numpy and numba kernel paths.

Both implementations are importable regardless of the ZKREDACT_KERNELS
selection, so a single process measures the identical workload on each.
Numbers are medians of repeated runs after a warmup pass.

Usage: python benchmarks/bench_kernels.py [--repeats N] [--quick]
"""

import argparse
import time
from statistics import median

import numpy as np

from zkredact.kernels import GL_PRIME, numba_impl, numpy_impl
from zkredact.zkbackend import (
    ChunkStatement,
    ChunkWitness,
    compile_chunk_circuit,
)
from zkredact.zkbackend.circuit import NUM_PUBLIC
from zkredact.hashchain import ShaState, sha_round


def timed(fn, repeats):
    fn()   # warmup: jit compilation, cache faults
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return median(times)


def field_mul_case(impl, n):
    r = np.random.default_rng(1)
    a = r.integers(0, GL_PRIME, size=n, dtype=np.uint64)
    b = r.integers(0, GL_PRIME, size=n, dtype=np.uint64)
    return lambda: impl.mul(a, b)


def ntt_case(impl, rows, width):
    from zkredact.zkbackend.field import _domain
    dom = _domain(width)
    r = np.random.default_rng(2)
    mat = r.integers(0, GL_PRIME, size=(rows, width), dtype=np.uint64)
    return lambda: impl.ntt(mat, dom.twiddles, dom.perm)


def sha_case(impl, blocks):
    r = np.random.default_rng(3)
    data = r.integers(0, 2**32, size=(blocks, 16), dtype=np.uint64).astype(np.uint32)
    iv = np.array([int(w) for w in ShaState.from_bytes(
        bytes.fromhex("6a09e667bb67ae853c6ef372a54ff53a"
                      "510e527f9b05688c1f83d9ab5be0cd19")).words],
                  dtype=np.uint32)
    return lambda: impl.sha_compress(data, iv)


def witness_program_case(impl):
    circuit = compile_chunk_circuit(((0, 64),))
    original = bytes(range(64))
    prev = tuple(ShaState.from_bytes(bytes(32)).words)
    next_state = tuple(sha_round(ShaState(prev), original).words)
    statement = ChunkStatement(0, prev, bytes(64), ((0, 64),), next_state)
    base = np.zeros(circuit.cs.num_wires, dtype=np.uint64)
    base[0] = 1
    base[1:1 + NUM_PUBLIC] = circuit.public_input(statement)
    base[1 + NUM_PUBLIC:1 + NUM_PUBLIC + 64] = np.frombuffer(original, np.uint8)
    p = circuit.program

    def run():
        values = base.copy()
        impl.run_program(values, p.kinds, p.out_ptr, p.out_idx, p.widths,
                         p.a_ptr, p.a_wire, p.a_coef, p.a_const,
                         p.b_ptr, p.b_wire, p.b_coef, p.b_const, p.batch_ptr)
        return values
    return run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=9)
    ap.add_argument("--quick", action="store_true",
                    help="smaller sizes, fewer repeats")
    args = ap.parse_args()
    repeats = 3 if args.quick else args.repeats
    scale = 4 if args.quick else 1

    if numba_impl is None:
        raise SystemExit("numba path unavailable in this environment")

    cases = [
        (f"field mul, {2**20 // scale} lanes",
         lambda impl: field_mul_case(impl, 2**20 // scale)),
        (f"ntt, {64 // scale} rows x 2048",
         lambda impl: ntt_case(impl, 64 // scale, 2048)),
        (f"sha-256 compress, {4096 // scale} blocks",
         lambda impl: sha_case(impl, 4096 // scale)),
        ("witness program, full-chunk circuit", lambda impl: witness_program_case(impl)),
    ]

    print(f"{'case':<40} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for label, make in cases:
        t_np = timed(make(numpy_impl), repeats)
        t_nb = timed(make(numba_impl), repeats)
        print(f"{label:<40} {t_np * 1e3:>10.2f}ms {t_nb * 1e3:>10.2f}ms "
              f"{t_np / t_nb:>8.2f}x")


if __name__ == "__main__":
    main()

"""Proof backends over a shared rank-1 constraint system.

Two interchangeable backends prove the chunk statement "hidden bytes spliced
into the published zero-filled chunk advance the compression state from
prev_state to next_state":

    dev     hash-based commitment transcript, fast, NOT zero knowledge and
            NOT sound against a lying prover; for pipelines and tests
    sound   transparent interactive-oracle proof (Merkle matrix commitment,
            low-degree + linear + quadratic tests, Fiat-Shamir), no trusted
            setup

Both expose prove/verify with identical signatures and are registered here.
"""

from __future__ import annotations

from .statement import (
    CHUNK_SIZE,
    DEL_DATA_LENGTH,
    BadLayout,
    ChunkStatement,
    ChunkWitness,
    layout_size,
    normalize_layout,
)
from .circuit import (
    ChunkCircuit,
    LayoutMismatch,
    assign,
    compile_chunk_circuit,
)
from .r1cs import Assignment, ConstraintSystem, is_satisfied
from .backend import (
    Proof,
    ProofBackend,
    UnknownBackend,
    UnsatisfiedWitness,
    VerifyResult,
    available_backends,
    get_backend,
)

__all__ = [
    "Assignment",
    "BadLayout",
    "CHUNK_SIZE",
    "ChunkCircuit",
    "ChunkStatement",
    "ChunkWitness",
    "ConstraintSystem",
    "DEL_DATA_LENGTH",
    "LayoutMismatch",
    "Proof",
    "ProofBackend",
    "UnknownBackend",
    "UnsatisfiedWitness",
    "VerifyResult",
    "assign",
    "available_backends",
    "compile_chunk_circuit",
    "get_backend",
    "is_satisfied",
    "layout_size",
    "normalize_layout",
]

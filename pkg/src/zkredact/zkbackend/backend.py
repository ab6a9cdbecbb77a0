"""Backend registry, shared proof types, and the dev backend.

The dev backend exists so pipelines can run end-to-end fast: it checks the
witness locally, then emits a salted commitment transcript whose MAC binds
the circuit digest and the statement digest.  Every byte of the proof is
load-bearing for verification, but the backend is NOT sound (nothing stops
a prover who lies about having a witness), NOT zero knowledge beyond the
salted hash, and NOT succinct in any interesting sense.  Use "sound" for
real guarantees.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

from .circuit import ChunkCircuit, assign
from .r1cs import is_satisfied
from .statement import ChunkStatement, ChunkWitness


class UnsatisfiedWitness(ValueError):
    """The witness does not satisfy the constraint system."""


class UnknownBackend(KeyError):
    pass


@dataclass(frozen=True)
class Proof:
    backend_id: str
    data: bytes


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


class ProofBackend:
    """Interface shared by both backends."""

    backend_id: str = ""

    def prove(self, circuit: ChunkCircuit, statement: ChunkStatement,
              witness: ChunkWitness, seed: bytes | None = None) -> Proof:
        raise NotImplementedError

    def verify(self, circuit: ChunkCircuit, statement: ChunkStatement,
               proof: Proof) -> VerifyResult:
        raise NotImplementedError

    def _check_witness(self, circuit: ChunkCircuit, statement: ChunkStatement,
                       witness: ChunkWitness):
        assignment = assign(circuit, statement, witness)
        if not is_satisfied(circuit.cs, assignment):
            raise UnsatisfiedWitness(
                "witness does not satisfy the chunk constraint system")
        return assignment


_DEV_TAG = b"zkredact-dev-v1"


class DevBackend(ProofBackend):
    """Fast development backend: NOT sound and NOT zero knowledge.

    It checks the witness locally and emits a salted commitment with a MAC
    over the circuit and statement digests.  Tampering is detected, but
    nothing stops a prover from lying about having a witness.  Use `sound`
    for anything beyond development loops.
    """

    backend_id = "dev"

    _SALT = 16
    _LEN = 16 + 32 + 32

    def prove(self, circuit, statement, witness, seed=None):
        self._check_witness(circuit, statement, witness)
        if seed is None:
            seed = os.urandom(32)
        salt = hashlib.sha256(_DEV_TAG + b"salt" + seed).digest()[:self._SALT]
        commit = hashlib.sha256(
            _DEV_TAG + b"commit" + salt + witness.deleted_data).digest()
        mac = hashlib.sha256(
            _DEV_TAG + b"mac" + circuit.cs.digest() + statement.digest()
            + salt + commit).digest()
        return Proof(self.backend_id, salt + commit + mac)

    def verify(self, circuit, statement, proof):
        if proof.backend_id != self.backend_id:
            return VerifyResult(False, f"proof built for backend {proof.backend_id!r}")
        if len(proof.data) != self._LEN:
            return VerifyResult(False, "malformed proof length")
        salt = proof.data[:self._SALT]
        commit = proof.data[self._SALT:self._SALT + 32]
        mac = proof.data[self._SALT + 32:]
        try:
            want = hashlib.sha256(
                _DEV_TAG + b"mac" + circuit.cs.digest() + statement.digest()
                + salt + commit).digest()
        except Exception as exc:   # statement validation
            return VerifyResult(False, str(exc))
        if mac != want:
            return VerifyResult(False, "binding MAC mismatch")
        return VerifyResult(True)


_registry: dict[str, ProofBackend] = {}


def register_backend(backend: ProofBackend):
    _registry[backend.backend_id] = backend


def get_backend(name: str) -> ProofBackend:
    try:
        return _registry[name]
    except KeyError:
        raise UnknownBackend(name) from None


def available_backends() -> list[str]:
    return sorted(_registry)


register_backend(DevBackend())

# the sound backend registers itself on import; keep it after the registry
from . import ligero as _ligero  # noqa: E402,F401

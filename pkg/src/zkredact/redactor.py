"""Build redactions: delete bytes locally, prove the hash chain still holds.

A redaction zero-fills chosen byte ranges of one transaction and attaches,
for every 64-byte chunk the ranges touch, a proof that the original hidden
bytes advance the SHA-256 chaining state across that chunk.  All other
chunks stay recomputable from public bytes, so the transaction id, and with
it the block Merkle root, is verifiable without the deleted data.

Deleting more bytes from an already redacted transaction works as long as
the new ranges touch chunks no earlier redaction touched; the old record
supplies the chaining states the redactor can no longer recompute.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .hashchain import INITIAL_STATE, ShaState, pad, sha_round
from .txcodec import (
    ByteInterval,
    ParsedTransaction,
    locate_allowed_regions,
    parse_block,
    replace_transaction,
    serialize_transaction,
)
from .zkbackend import (
    DEL_DATA_LENGTH,
    ChunkStatement,
    ChunkWitness,
    Proof,
    available_backends,
    compile_chunk_circuit,
    get_backend,
)
from .zkbackend.statement import CHUNK_SIZE, Layout

FIELD_PRIME_HEX = "0xffffffff00000001"


class RedactionError(ValueError):
    pass


class EmptyRequest(RedactionError):
    pass


class NotAllowedRegion(RedactionError):
    pass


class OverlappingIntervals(RedactionError):
    pass


class SameChunkTwice(RedactionError):
    def __init__(self, chunk_index: int, tx_index: int | None = None):
        where = f"transaction {tx_index}, " if tx_index is not None else ""
        super().__init__(
            f"{where}chunk {chunk_index} already carries a redaction; "
            "a second deletion in the same chunk would need the hidden bytes")
        self.chunk_index = chunk_index
        self.tx_index = tx_index


class ChunkCapacityExceeded(RedactionError):
    def __init__(self, chunk_index: int, size: int):
        super().__init__(
            f"chunk {chunk_index} would hide {size} bytes, "
            f"limit is {DEL_DATA_LENGTH}")
        self.chunk_index = chunk_index


class BundleError(RedactionError):
    pass


@dataclass(frozen=True)
class RedactionRequest:
    block_hash: bytes
    tx_index: int
    intervals: tuple[ByteInterval, ...]


@dataclass(frozen=True)
class ChunkProof:
    index: int
    prev_state: ShaState
    next_state: ShaState
    proof: Proof


@dataclass(frozen=True)
class RedactionRecord:
    tx_index: int
    intervals: tuple[ByteInterval, ...]
    chunks: tuple[ChunkProof, ...]
    inner_digest: bytes            # final chaining state of the original tx

    def chunk_indices(self) -> set[int]:
        return {c.index for c in self.chunks}

    def chunk(self, index: int) -> ChunkProof:
        for c in self.chunks:
            if c.index == index:
                return c
        raise KeyError(index)


@dataclass(frozen=True)
class ProofBundle:
    block_hash: bytes
    backend_id: str
    records: tuple[RedactionRecord, ...]

    def record_for(self, tx_index: int) -> RedactionRecord | None:
        for r in self.records:
            if r.tx_index == tx_index:
                return r
        return None


def validate_request(tx: ParsedTransaction,
                     intervals) -> tuple[ByteInterval, ...]:
    """Normalize and vet intervals: sorted, disjoint, inside allowed regions."""
    ivs = tuple(sorted((iv if isinstance(iv, ByteInterval) else ByteInterval(*iv)
                        for iv in intervals), key=lambda r: r.start))
    if not ivs:
        raise EmptyRequest("a redaction needs at least one interval")
    prev_end = -1
    for iv in ivs:
        if iv.start < prev_end:
            raise OverlappingIntervals(f"interval [{iv.start}, {iv.end}) overlaps another")
        prev_end = iv.end
    regions = locate_allowed_regions(tx)
    for iv in ivs:
        if not any(region.contains(iv) for region in regions):
            raise NotAllowedRegion(
                f"interval [{iv.start}, {iv.end}) is not inside any allowed region")
    return ivs


def zero_fill(data: bytes, intervals) -> bytes:
    """Copy of `data` with every interval overwritten by zero bytes."""
    out = bytearray(data)
    for iv in intervals:
        if iv.end > len(data):
            raise ValueError(f"interval [{iv.start}, {iv.end}) outside data")
        out[iv.start:iv.end] = bytes(len(iv))
    return bytes(out)


def extract(data: bytes, intervals) -> bytes:
    """The bytes the intervals cover, concatenated in order."""
    return b"".join(data[iv.start:iv.end] for iv in intervals)


def splice(chunk: bytes, layout: Layout, deleted: bytes) -> bytes:
    """Write hidden bytes back into their spans; inverse of per-chunk zeroing."""
    out = bytearray(chunk)
    pos = 0
    for s, e in layout:
        out[s:e] = deleted[pos:pos + (e - s)]
        pos += e - s
    if pos != len(deleted):
        raise ValueError(f"layout holds {pos} bytes, witness has {len(deleted)}")
    return bytes(out)


def chunk_layouts(intervals) -> dict[int, Layout]:
    """Chunk-local [start, end) spans for absolute byte intervals."""
    spans: dict[int, list[tuple[int, int]]] = {}
    for iv in intervals:
        first = iv.start // CHUNK_SIZE
        last = (iv.end - 1) // CHUNK_SIZE
        for ci in range(first, last + 1):
            base = ci * CHUNK_SIZE
            s = max(iv.start, base) - base
            e = min(iv.end, base + CHUNK_SIZE) - base
            spans.setdefault(ci, []).append((s, e))
    return {ci: tuple(sorted(sp)) for ci, sp in sorted(spans.items())}


def reconstruct_chain(tx_raw: bytes,
                      existing: RedactionRecord | None) -> list[ShaState]:
    """Chaining states h_0..h_m of the original transaction.

    Chunks covered by an existing record cannot be recomputed from the
    given (already zero-filled) bytes; their revealed transitions stand in.
    Linkage against the recomputable chunks is checked as we go.
    """
    chunks = pad(tx_raw)
    states = [INITIAL_STATE]
    for i, chunk in enumerate(chunks):
        if existing is not None and i in existing.chunk_indices():
            cp = existing.chunk(i)
            if cp.prev_state != states[-1]:
                raise BundleError(
                    f"existing record breaks the state chain at chunk {i}")
            states.append(cp.next_state)
        else:
            states.append(sha_round(states[-1], chunk))
    return states


def prove_deletion(data: bytes, ivs: tuple[ByteInterval, ...], backend: str,
                   existing: RedactionRecord | None = None,
                   seed: bytes | None = None,
                   tx_index: int | None = None,
                   ) -> tuple[bytes, tuple[ChunkProof, ...], bytes]:
    """Prove the deletion of `ivs` from `data` and zero-fill them.

    Works on any byte string hashed as a chain (transaction bytes for ids,
    script bytes for redeem digests).  Returns the zeroed bytes, one proved
    transition per touched chunk, and the inner digest of the original.
    """
    layouts = chunk_layouts(ivs)
    existing_chunks = existing.chunk_indices() if existing else set()
    for ci, layout in layouts.items():
        if ci in existing_chunks:
            raise SameChunkTwice(ci, tx_index)
        size = sum(e - s for s, e in layout)
        if size > DEL_DATA_LENGTH:
            raise ChunkCapacityExceeded(ci, size)
    if existing is not None:
        for iv in ivs:
            for old in existing.intervals:
                if iv.overlaps(old):
                    raise OverlappingIntervals(
                        f"interval [{iv.start}, {iv.end}) overlaps an earlier redaction")

    states = reconstruct_chain(data, existing)
    inner_digest = states[-1].to_bytes()

    padded = pad(data)
    prover = get_backend(backend)
    chunk_proofs = []
    for ci, layout in layouts.items():
        local = [ByteInterval(s, e) for s, e in layout]
        statement = ChunkStatement(
            chunk_index=ci,
            prev_state=tuple(states[ci]),
            chunk=zero_fill(padded[ci], local),
            layout=layout,
            next_state=tuple(states[ci + 1]),
        )
        witness = ChunkWitness(extract(padded[ci], local))
        circuit = compile_chunk_circuit(layout)
        chunk_seed = None if seed is None else hashlib.sha256(
            seed + ci.to_bytes(4, "big")).digest()
        proof = prover.prove(circuit, statement, witness, seed=chunk_seed)
        chunk_proofs.append(ChunkProof(ci, ShaState(statement.prev_state),
                                       ShaState(statement.next_state), proof))
    return zero_fill(data, ivs), tuple(chunk_proofs), inner_digest


def build_redaction(block_raw: bytes, tx_index: int, intervals,
                    backend: str = "sound",
                    existing: RedactionRecord | None = None,
                    seed: bytes | None = None) -> tuple[bytes, RedactionRecord]:
    """Zero-fill intervals of one transaction and prove every touched chunk.

    `block_raw` is the current block serialization (already redacted if
    `existing` is given).  Returns the new block bytes and a record covering
    only this operation; merge it with earlier records via merge_bundles.
    Proving happens before any bytes change, so a failure leaves the block
    as it was.
    """
    block = parse_block(block_raw)
    if not 0 <= tx_index < len(block.transactions):
        raise RedactionError(f"block has no transaction {tx_index}")
    tx = block.transactions[tx_index]
    tx_raw = serialize_transaction(tx)
    ivs = validate_request(tx, intervals)
    redacted_tx, chunk_proofs, inner_digest = prove_deletion(
        tx_raw, ivs, backend, existing=existing, seed=seed, tx_index=tx_index)
    record = RedactionRecord(
        tx_index=tx_index,
        intervals=ivs,
        chunks=chunk_proofs,
        inner_digest=inner_digest,
    )
    new_block = replace_transaction(block_raw, block, tx_index, redacted_tx)
    return new_block, record


def _merge_records(a: RedactionRecord, b: RedactionRecord) -> RedactionRecord:
    clash = a.chunk_indices() & b.chunk_indices()
    if clash:
        raise SameChunkTwice(min(clash), a.tx_index)
    if a.inner_digest != b.inner_digest:
        raise BundleError(
            f"records for transaction {a.tx_index} disagree on the inner digest")
    for ia in a.intervals:
        for ib in b.intervals:
            if ia.overlaps(ib):
                raise OverlappingIntervals(
                    f"merged records overlap at [{max(ia.start, ib.start)}, "
                    f"{min(ia.end, ib.end)})")
    return RedactionRecord(
        tx_index=a.tx_index,
        intervals=tuple(sorted(a.intervals + b.intervals, key=lambda r: r.start)),
        chunks=tuple(sorted(a.chunks + b.chunks, key=lambda c: c.index)),
        inner_digest=a.inner_digest,
    )


def merge_bundles(a: ProofBundle, b: ProofBundle) -> ProofBundle:
    """Union of two bundles for the same block.

    Records for the same transaction merge chunk-wise; a chunk carrying
    proofs in both inputs is rejected, because its second deletion would
    have required the already deleted bytes.
    """
    if a.block_hash != b.block_hash:
        raise BundleError("bundles describe different blocks")
    if a.backend_id != b.backend_id:
        raise BundleError(
            f"bundles use different backends: {a.backend_id!r} vs {b.backend_id!r}")
    merged: dict[int, RedactionRecord] = {r.tx_index: r for r in a.records}
    for rec in b.records:
        if rec.tx_index in merged:
            merged[rec.tx_index] = _merge_records(merged[rec.tx_index], rec)
        else:
            merged[rec.tx_index] = rec
    return ProofBundle(
        block_hash=a.block_hash,
        backend_id=a.backend_id,
        records=tuple(sorted(merged.values(), key=lambda r: r.tx_index)),
    )


# --- canonical JSON codec -------------------------------------------------

def bundle_to_json(bundle: ProofBundle) -> bytes:
    doc = {
        "backend": bundle.backend_id,
        "block_hash": bundle.block_hash.hex(),
        "field_prime": FIELD_PRIME_HEX,
        "records": [
            {
                "tx_index": rec.tx_index,
                "inner_digest": rec.inner_digest.hex(),
                "intervals": [{"start": iv.start, "end": iv.end}
                              for iv in sorted(rec.intervals, key=lambda r: r.start)],
                "chunks": [
                    {
                        "index": cp.index,
                        "prev_state": list(cp.prev_state.words),
                        "next_state": list(cp.next_state.words),
                        "proof": cp.proof.data.hex(),
                    }
                    for cp in sorted(rec.chunks, key=lambda c: c.index)
                ],
            }
            for rec in sorted(bundle.records, key=lambda r: r.tx_index)
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def bundle_from_json(raw: bytes) -> ProofBundle:
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise BundleError(f"bundle is not valid JSON: {exc}") from None
    try:
        if doc["field_prime"] != FIELD_PRIME_HEX:
            raise BundleError(f"bundle uses field prime {doc['field_prime']}, "
                              f"expected {FIELD_PRIME_HEX}")
        backend = doc["backend"]
        if backend not in available_backends():
            raise BundleError(f"bundle names unknown backend {backend!r}")
        records = []
        for rd in doc["records"]:
            inner_digest = bytes.fromhex(rd["inner_digest"])
            if len(inner_digest) != 32:
                raise BundleError("inner digest must encode 32 bytes")
            records.append(RedactionRecord(
                tx_index=int(rd["tx_index"]),
                intervals=tuple(ByteInterval(int(d["start"]), int(d["end"]))
                                for d in rd["intervals"]),
                chunks=tuple(
                    ChunkProof(
                        index=int(cd["index"]),
                        prev_state=ShaState(tuple(int(w) for w in cd["prev_state"])),
                        next_state=ShaState(tuple(int(w) for w in cd["next_state"])),
                        proof=Proof(backend, bytes.fromhex(cd["proof"])),
                    )
                    for cd in rd["chunks"]),
                inner_digest=inner_digest,
            ))
        block_hash = bytes.fromhex(doc["block_hash"])
        if len(block_hash) != 32:
            raise BundleError("block hash must encode 32 bytes")
        return ProofBundle(
            block_hash=block_hash,
            backend_id=backend,
            records=tuple(records),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, BundleError):
            raise
        raise BundleError(f"malformed bundle: {exc!r}") from None


def bundle_digest(raw_json: bytes) -> bytes:
    return hashlib.sha256(raw_json).digest()

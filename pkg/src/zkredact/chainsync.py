"""Verify chains that carry redactions, and redeem redacted outputs.

The verifier trusts nothing it can recompute: transaction ids are rebuilt
chunk by chunk, with proved transitions standing in exactly where a bundle
declares deletions, and the resulting leaves must reproduce the committed
Merkle root.  A block without a bundle must hash clean; a block whose bytes
changed without proofs fails.

Also here: the hash buddies for spending a redacted output.  A signature
over sighash_redacted commits to single-SHA digests of the scripts, so the
digest of a later-redacted output script can be fed from its redaction
record instead of the deleted bytes.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass, field as dfield
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import Prehashed
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .hashchain import INITIAL_STATE, merkle_root, pad, sha_round
from .redactor import (
    ProofBundle,
    RedactionRecord,
    bundle_digest,
    bundle_from_json,
    bundle_to_json,
    chunk_layouts,
    extract,
    prove_deletion,
    validate_request,
)
from .txcodec import (
    ByteInterval,
    OP_RETURN,
    OP_PUSHDATA1,
    OP_PUSHDATA2,
    OP_PUSHDATA4,
    TxCodecError,
    iter_script,
    parse_block,
    serialize_transaction,
    txid,
)
from .zkbackend import (
    ChunkStatement,
    UnknownBackend,
    compile_chunk_circuit,
    get_backend,
)

VALID = "valid"
VALID_WITH_REDACTIONS = "valid_with_redactions"
INVALID = "invalid"


@dataclass(frozen=True)
class VerifyOutcome:
    status: str
    reason: str = ""
    redacted_transactions: int = 0
    proved_chunks: int = 0

    def __bool__(self) -> bool:
        return self.status != INVALID

    @classmethod
    def invalid(cls, reason: str) -> "VerifyOutcome":
        return cls(INVALID, reason)


def _walk_record(data: bytes, record: RedactionRecord) -> tuple[bool, str]:
    """Recompute the digest chain of `data`, trusting only proved chunks.

    `data` is the redacted byte string; the record supplies revealed
    chaining states and proofs for the chunks it deleted from.  Success
    means the record's inner digest is the digest of the original bytes.
    """
    ivs = sorted(record.intervals, key=lambda r: r.start)
    prev_end = -1
    for iv in ivs:
        if iv.end > len(data):
            return False, f"interval [{iv.start}, {iv.end}) outside the data"
        if iv.start < prev_end:
            return False, f"interval [{iv.start}, {iv.end}) overlaps another"
        prev_end = iv.end
    if any(extract(data, [iv]).strip(b"\x00") for iv in ivs):
        return False, "redacted intervals are not zero-filled"

    layouts = chunk_layouts(ivs)
    if set(layouts) != record.chunk_indices():
        return False, "proved chunks do not match the declared intervals"

    state = INITIAL_STATE
    proved = 0
    for ci, chunk in enumerate(pad(data)):
        if ci in layouts:
            cp = record.chunk(ci)
            if cp.prev_state != state:
                return False, f"state chain broken entering chunk {ci}"
            statement = ChunkStatement(
                chunk_index=ci,
                prev_state=tuple(cp.prev_state),
                chunk=chunk,
                layout=layouts[ci],
                next_state=tuple(cp.next_state),
            )
            try:
                backend = get_backend(cp.proof.backend_id)
            except UnknownBackend:
                return False, f"chunk {ci}: unknown backend {cp.proof.backend_id!r}"
            circuit = compile_chunk_circuit(layouts[ci])
            res = backend.verify(circuit, statement, cp.proof)
            if not res:
                return False, f"chunk {ci}: proof rejected ({res.reason})"
            state = cp.next_state
            proved += 1
        else:
            state = sha_round(state, chunk)
    if state.to_bytes() != record.inner_digest:
        return False, "inner digest does not match the recomputed chain"
    return True, ""


def verify_block(block_raw: bytes, bundle: ProofBundle | None,
                 prev_hash: bytes | None = None) -> VerifyOutcome:
    """Check one block, honoring its redaction bundle if present.

    Every transaction id is recomputed; ids of redacted transactions come
    from their proved inner digests.  The ids must reproduce the header's
    Merkle root, and the header must extend `prev_hash` when given.
    """
    try:
        block = parse_block(block_raw)
    except TxCodecError as exc:
        return VerifyOutcome.invalid(f"block does not parse: {exc}")

    if prev_hash is not None and block.header.prev_block_hash != prev_hash:
        return VerifyOutcome.invalid("header does not extend the previous block")

    records: dict[int, RedactionRecord] = {}
    if bundle is not None and bundle.records:
        if bundle.block_hash != block.block_hash():
            return VerifyOutcome.invalid("bundle names a different block hash")
        for rec in bundle.records:
            if not 0 <= rec.tx_index < len(block.transactions):
                return VerifyOutcome.invalid(
                    f"bundle references transaction {rec.tx_index}, "
                    f"block has {len(block.transactions)}")
            if rec.tx_index in records:
                return VerifyOutcome.invalid(
                    f"bundle has two records for transaction {rec.tx_index}")
            records[rec.tx_index] = rec

    leaves = []
    proved_chunks = 0
    for i, tx in enumerate(block.transactions):
        tx_raw = serialize_transaction(tx)
        rec = records.get(i)
        if rec is None:
            leaves.append(txid(tx_raw))
            continue
        try:
            validate_request(tx, rec.intervals)
        except ValueError as exc:
            return VerifyOutcome.invalid(f"transaction {i}: {exc}")
        ok, reason = _walk_record(tx_raw, rec)
        if not ok:
            return VerifyOutcome.invalid(f"transaction {i}: {reason}")
        proved_chunks += len(rec.chunks)
        leaves.append(hashlib.sha256(rec.inner_digest).digest())

    if merkle_root(leaves) != block.header.merkle_root:
        return VerifyOutcome.invalid("merkle root mismatch")
    if records:
        return VerifyOutcome(VALID_WITH_REDACTIONS,
                             redacted_transactions=len(records),
                             proved_chunks=proved_chunks)
    return VerifyOutcome(VALID)


# --- on-disk chain store ----------------------------------------------------


def _atomic_write(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


class ChainStore:
    """Directory of `<height>.blk` blocks and `<height>.bundle.json` bundles.

    Writes are atomic (temp file + rename) and a redaction always lands
    bundle first, block second: the store may briefly hold a bundle for a
    not-yet-redacted block, never a redacted block without its bundle.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def block_path(self, height: int) -> Path:
        return self.root / f"{height}.blk"

    def bundle_path(self, height: int) -> Path:
        return self.root / f"{height}.bundle.json"

    def heights(self) -> list[int]:
        return sorted(int(p.stem) for p in self.root.glob("*.blk"))

    def has_block(self, height: int) -> bool:
        return self.block_path(height).exists()

    def read_block(self, height: int) -> bytes:
        return self.block_path(height).read_bytes()

    def read_bundle_bytes(self, height: int) -> bytes | None:
        path = self.bundle_path(height)
        return path.read_bytes() if path.exists() else None

    def read_bundle(self, height: int) -> ProofBundle | None:
        raw = self.read_bundle_bytes(height)
        return None if raw is None else bundle_from_json(raw)

    def write_block(self, height: int, raw: bytes):
        _atomic_write(self.block_path(height), raw)

    def write_bundle(self, height: int, bundle: ProofBundle | bytes):
        raw = bundle if isinstance(bundle, bytes) else bundle_to_json(bundle)
        _atomic_write(self.bundle_path(height), raw)

    def apply_redaction(self, height: int, block_raw: bytes, bundle: ProofBundle):
        self.write_bundle(height, bundle)
        self.write_block(height, block_raw)


@dataclass
class ChainReport:
    outcomes: dict[int, VerifyOutcome] = dfield(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.outcomes.values()) and bool(self.outcomes)

    def first_failure(self) -> int | None:
        for h in sorted(self.outcomes):
            if not self.outcomes[h]:
                return h
        return None


def verify_chain(store: ChainStore,
                 cache: dict[tuple[bytes, bytes], VerifyOutcome] | None = None,
                 ) -> ChainReport:
    """Verify every stored block in height order, checking header linkage.

    `cache` maps (block hash, bundle digest) to earlier outcomes; editing a
    bundle changes its digest, so stale entries can never be replayed.
    """
    report = ChainReport()
    prev_hash: bytes | None = None
    for height in store.heights():
        block_raw = store.read_block(height)
        bundle_raw = store.read_bundle_bytes(height)
        try:
            bundle = None if bundle_raw is None else bundle_from_json(bundle_raw)
        except ValueError as exc:
            report.outcomes[height] = VerifyOutcome.invalid(str(exc))
            prev_hash = None
            continue
        key = None
        if cache is not None:
            try:
                head_hash = parse_block(block_raw).block_hash()
            except TxCodecError:
                head_hash = hashlib.sha256(block_raw).digest()
            key = (head_hash + (prev_hash or b""),
                   bundle_digest(bundle_raw) if bundle_raw is not None else b"")
            if key in cache:
                outcome = cache[key]
                report.outcomes[height] = outcome
                prev_hash = head_hash if outcome else None
                continue
        outcome = verify_block(block_raw, bundle, prev_hash)
        report.outcomes[height] = outcome
        if cache is not None and key is not None:
            cache[key] = outcome
        prev_hash = parse_block(block_raw).block_hash() if outcome else None
    return report


# --- redeeming outputs whose scripts were redacted --------------------------


def locate_dead_regions(script: bytes) -> list[ByteInterval]:
    """Payload spans of OP_RETURN pushes that can never execute.

    A span qualifies only when some enclosing conditional arm is provably
    dead: the branch opcode is guarded by a constant (OP_0, OP_1..OP_16,
    OP_1NEGATE) that statically selects the other arm.  Data there never
    reaches the stack, so deleting it cannot change execution.
    """
    OP_IF, OP_NOTIF, OP_ELSE, OP_ENDIF = 0x63, 0x64, 0x67, 0x68
    truthy = {0x00: False, 0x4F: True}
    truthy.update({op: True for op in range(0x51, 0x61)})

    frames: list[tuple[bool, bool]] = []   # (guard known, current arm live)
    regions: list[ByteInterval] = []
    prev_op: int | None = None
    want_push_at: int | None = None
    for op, start, plen, nxt in iter_script(script):
        dead = any(known and not live for known, live in frames)
        if want_push_at is not None:
            if (dead and plen
                    and (0x01 <= op <= 0x4B or op in (OP_PUSHDATA1, OP_PUSHDATA2))):
                regions.append(ByteInterval(start, start + plen))
            want_push_at = None
        if op in (OP_IF, OP_NOTIF):
            known = prev_op in truthy
            taken_first = truthy.get(prev_op, False) == (op == OP_IF)
            frames.append((known, taken_first))
        elif op == OP_ELSE and frames:
            known, live = frames[-1]
            frames[-1] = (known, not live)
        elif op == OP_ENDIF and frames:
            frames.pop()
        elif op == OP_RETURN and dead:
            want_push_at = nxt
        prev_op = op
    return regions


def sighash_redacted(output_script: bytes, input_script: bytes) -> bytes:
    """Signature digest committing to the scripts through single-SHA digests.

    Because each script enters through its own SHA-256, a verifier can
    substitute a proved inner digest for a script it no longer has in full.
    """
    return hashlib.sha256(
        hashlib.sha256(output_script).digest()
        + hashlib.sha256(input_script).digest()).digest()


def redact_script(script: bytes, intervals, backend: str = "sound",
                  existing: RedactionRecord | None = None,
                  seed: bytes | None = None) -> tuple[bytes, RedactionRecord]:
    """Delete bytes from dead OP_RETURN spans of an output script."""
    ivs = tuple(sorted((iv if isinstance(iv, ByteInterval) else ByteInterval(*iv)
                        for iv in intervals), key=lambda r: r.start))
    if not ivs:
        raise ValueError("a script redaction needs at least one interval")
    regions = locate_dead_regions(script)
    for iv in ivs:
        if not any(region.contains(iv) for region in regions):
            raise ValueError(
                f"interval [{iv.start}, {iv.end}) is not inside a dead span")
    zeroed, chunks, inner = prove_deletion(script, ivs, backend,
                                           existing=existing, seed=seed)
    return zeroed, RedactionRecord(0, ivs, chunks, inner)


def verify_redeem_redacted(redacted_script: bytes, record: RedactionRecord,
                           input_script: bytes, signature: bytes,
                           public_key) -> bool:
    """Check a spend of an output whose script lost bytes to redaction.

    Three things must hold: the deleted spans sat in dead OP_RETURN pushes,
    the record's proofs rebuild the original script digest, and the
    signature covers sighash_redacted with that digest on the output side.
    """
    regions = locate_dead_regions(redacted_script)
    for iv in record.intervals:
        if not any(region.contains(iv) for region in regions):
            return False
    ok, _ = _walk_record(redacted_script, record)
    if not ok:
        return False
    digest = hashlib.sha256(
        record.inner_digest + hashlib.sha256(input_script).digest()).digest()
    key = load_public_key(public_key)
    try:
        key.verify(signature, digest, ec.ECDSA(Prehashed(hashes.SHA256())))
    except InvalidSignature:
        return False
    return True


# --- simulation-only key helpers (never use for real funds) -----------------


def make_simulation_keypair():
    """Fresh secp256k1 keypair for fixtures and tests, nothing else."""
    private = ec.generate_private_key(ec.SECP256K1())
    public = private.public_key().public_bytes(
        Encoding.X962, PublicFormat.CompressedPoint)
    return private, public


def load_public_key(key):
    if isinstance(key, ec.EllipticCurvePublicKey):
        return key
    return ec.EllipticCurvePublicKey.from_encoded_point(ec.SECP256K1(), bytes(key))


def sign_redeem(private_key, output_digest: bytes, input_script: bytes) -> bytes:
    """Sign sighash_redacted where the output side is already a digest."""
    digest = hashlib.sha256(
        output_digest + hashlib.sha256(input_script).digest()).digest()
    return private_key.sign(digest, ec.ECDSA(Prehashed(hashes.SHA256())))


def __getattr__(name):
    if name in ("serve", "fetch_and_verify", "ProtocolViolation",
                "VerificationFailed"):
        from . import peer
        return getattr(peer, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")

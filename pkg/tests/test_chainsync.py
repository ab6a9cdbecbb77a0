"""Chain verification, the on-disk store, and redeeming redacted outputs."""

import hashlib
from dataclasses import replace

import pytest
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import Prehashed

from conftest import SENTENCE_SPAN, make_block, make_chain, make_tx, op_return_script
from zkredact.chainsync import (
    ChainStore,
    INVALID,
    VALID,
    VALID_WITH_REDACTIONS,
    VerifyOutcome,
    locate_dead_regions,
    make_simulation_keypair,
    redact_script,
    sighash_redacted,
    sign_redeem,
    verify_block,
    verify_chain,
    verify_redeem_redacted,
)
from zkredact.redactor import ProofBundle, build_redaction, bundle_to_json
from zkredact.txcodec import ByteInterval, parse_block
from zkredact.zkbackend import Proof


def redacted_genesis(genesis_raw, span=SENTENCE_SPAN, backend="dev"):
    new_block, record = build_redaction(genesis_raw, 0, [span], backend=backend)
    bundle = ProofBundle(parse_block(genesis_raw).block_hash(), backend, (record,))
    return new_block, bundle


# --- verify_block ---------------------------------------------------------------

def test_clean_block_valid(genesis_raw):
    outcome = verify_block(genesis_raw, None)
    assert outcome.status == VALID and bool(outcome)


def test_redacted_block_valid_with_redactions(genesis_raw):
    new_block, bundle = redacted_genesis(genesis_raw)
    outcome = verify_block(new_block, bundle)
    assert outcome.status == VALID_WITH_REDACTIONS
    assert outcome.redacted_transactions == 1
    assert outcome.proved_chunks == 2


def test_empty_bundle_counts_as_clean(genesis_raw):
    bundle = ProofBundle(parse_block(genesis_raw).block_hash(), "dev", ())
    assert verify_block(genesis_raw, bundle).status == VALID


def test_unparseable_block_invalid():
    outcome = verify_block(b"\x00" * 10, None)
    assert outcome.status == INVALID and "parse" in outcome.reason


def test_redacted_block_without_bundle_invalid(genesis_raw):
    new_block, _ = redacted_genesis(genesis_raw)
    outcome = verify_block(new_block, None)
    assert not outcome and outcome.reason == "merkle root mismatch"


def test_bundle_for_wrong_block_invalid(genesis_raw):
    new_block, bundle = redacted_genesis(genesis_raw)
    wrong = replace(bundle, block_hash=bytes(32))
    outcome = verify_block(new_block, wrong)
    assert not outcome and "different block" in outcome.reason


def test_prev_hash_linkage(genesis_raw):
    h = parse_block(genesis_raw).header.prev_block_hash
    assert verify_block(genesis_raw, None, prev_hash=h)
    bad = verify_block(genesis_raw, None, prev_hash=b"\x11" * 32)
    assert not bad and "extend" in bad.reason


def test_tampered_zero_region_invalid(genesis_raw):
    new_block, bundle = redacted_genesis(genesis_raw)
    span = parse_block(genesis_raw).tx_spans[0]
    data = bytearray(new_block)
    data[span.start + SENTENCE_SPAN[0] + 5] = 0x41
    outcome = verify_block(bytes(data), bundle)
    assert not outcome and "zero-filled" in outcome.reason


def test_tampered_unredacted_byte_invalid(genesis_raw):
    new_block, bundle = redacted_genesis(genesis_raw)
    data = bytearray(new_block)
    data[-3] ^= 0x01   # inside the output script, past the redacted span
    outcome = verify_block(bytes(data), bundle)
    assert outcome.status == INVALID


def test_record_out_of_range_tx_invalid(genesis_raw):
    new_block, bundle = redacted_genesis(genesis_raw)
    bad = replace(bundle, records=(replace(bundle.records[0], tx_index=7),))
    outcome = verify_block(new_block, bad)
    assert not outcome and "block has 1" in outcome.reason


def test_duplicate_records_invalid(genesis_raw):
    new_block, bundle = redacted_genesis(genesis_raw)
    bad = replace(bundle, records=bundle.records * 2)
    outcome = verify_block(new_block, bad)
    assert not outcome and "two records" in outcome.reason


def test_record_with_wrong_chunk_set_invalid(genesis_raw):
    new_block, bundle = redacted_genesis(genesis_raw)
    rec = bundle.records[0]
    dropped = replace(rec, chunks=rec.chunks[:1])
    outcome = verify_block(new_block, replace(bundle, records=(dropped,)))
    assert not outcome and "do not match" in outcome.reason


def test_broken_state_linkage_invalid(genesis_raw):
    new_block, bundle = redacted_genesis(genesis_raw)
    rec = bundle.records[0]
    c0, c1 = sorted(rec.chunks, key=lambda c: c.index)
    swapped = replace(rec, chunks=(replace(c0, next_state=c1.next_state),
                                   replace(c1, prev_state=c0.prev_state)))
    outcome = verify_block(new_block, replace(bundle, records=(swapped,)))
    assert outcome.status == INVALID


def test_wrong_inner_digest_invalid(genesis_raw):
    new_block, bundle = redacted_genesis(genesis_raw)
    rec = bundle.records[0]
    bad = replace(rec, inner_digest=hashlib.sha256(b"x").digest())
    outcome = verify_block(new_block, replace(bundle, records=(bad,)))
    assert outcome.status == INVALID


def test_interval_outside_allowed_region_invalid(genesis_raw):
    new_block, bundle = redacted_genesis(genesis_raw)
    rec = bundle.records[0]
    widened = replace(rec, intervals=(ByteInterval(4, 119),))
    outcome = verify_block(new_block, replace(bundle, records=(widened,)))
    assert not outcome and "allowed" in outcome.reason


def test_tampered_proof_invalid_both_backends(genesis_raw):
    for backend in ("dev", "sound"):
        new_block, bundle = redacted_genesis(genesis_raw, backend=backend)
        rec = bundle.records[0]
        cp = rec.chunks[0]
        bad_proof = Proof(backend, bytes([cp.proof.data[0] ^ 1]) + cp.proof.data[1:])
        bad = replace(rec, chunks=(replace(cp, proof=bad_proof),) + rec.chunks[1:])
        outcome = verify_block(new_block, replace(bundle, records=(bad,)))
        assert not outcome and "proof rejected" in outcome.reason


# --- the store and chain walks ----------------------------------------------------

def test_verify_chain_with_linkage(tmp_path, genesis_raw):
    blocks = make_chain([[b"payload one" + bytes(30)], [], [b"x" * 70]])
    store = ChainStore(tmp_path)
    for h, blk in enumerate(blocks):
        store.write_block(h, blk)
    report = verify_chain(store)
    assert report.ok and len(report.outcomes) == 3
    assert report.first_failure() is None


def test_verify_chain_detects_broken_linkage(tmp_path):
    blocks = make_chain([[], []])
    store = ChainStore(tmp_path)
    store.write_block(0, blocks[0])
    orphan = make_block(b"\x99" * 32, [make_tx(script_sig=b"zz")])
    store.write_block(1, orphan)
    report = verify_chain(store)
    assert not report.ok and report.first_failure() == 1
    assert "extend" in report.outcomes[1].reason


def test_verify_chain_redacted_middle_block(tmp_path):
    blocks = make_chain([[], [b"embedded secret" + bytes(49)], []])
    store = ChainStore(tmp_path)
    for h, blk in enumerate(blocks):
        store.write_block(h, blk)
    b1 = parse_block(blocks[1])
    payload_at = blocks[1].index(b"embedded secret")
    tx_rel = payload_at - b1.tx_spans[1].start
    new_b1, record = build_redaction(blocks[1], 1, [(tx_rel, tx_rel + 64)],
                                     backend="dev")
    store.apply_redaction(1, new_b1, ProofBundle(b1.block_hash(), "dev", (record,)))
    report = verify_chain(store)
    assert report.ok
    assert report.outcomes[1].status == VALID_WITH_REDACTIONS
    # the redaction did not break linkage for block 2
    assert report.outcomes[2].status == VALID


def test_verify_chain_cache_hit_and_invalidation(tmp_path, genesis_raw):
    new_block, bundle = redacted_genesis(genesis_raw)
    store = ChainStore(tmp_path)
    store.apply_redaction(0, new_block, bundle)
    cache: dict = {}
    assert verify_chain(store, cache).ok
    assert len(cache) == 1
    assert verify_chain(store, cache).ok   # second walk replays the cache
    # editing the bundle bytes invalidates the cached key
    raw = store.read_bundle_bytes(0)
    store.write_bundle(0, raw + b" ")
    report = verify_chain(store, cache)
    assert len(cache) == 2
    assert report.outcomes[0].status == VALID_WITH_REDACTIONS


def test_corrupt_bundle_file_reports_invalid(tmp_path, genesis_raw):
    new_block, bundle = redacted_genesis(genesis_raw)
    store = ChainStore(tmp_path)
    store.apply_redaction(0, new_block, bundle)
    store.bundle_path(0).write_bytes(b"{broken")
    report = verify_chain(store)
    assert not report.ok and report.outcomes[0].status == INVALID


def test_store_crash_between_writes_never_loses_data(tmp_path, genesis_raw):
    new_block, bundle = redacted_genesis(genesis_raw)
    store = ChainStore(tmp_path)
    store.write_block(0, genesis_raw)

    class Boom(RuntimeError):
        pass

    original = ChainStore.write_block
    def crashing(self, height, raw):
        raise Boom()
    ChainStore.write_block = crashing
    try:
        with pytest.raises(Boom):
            store.apply_redaction(0, new_block, bundle)
    finally:
        ChainStore.write_block = original

    # invariant: block bytes were never modified without their bundle
    assert store.read_block(0) == genesis_raw
    assert store.read_bundle_bytes(0) is not None
    # recovery: re-running the redaction completes the pair
    store.apply_redaction(0, new_block, bundle)
    assert verify_chain(store).ok


def test_atomic_write_leaves_no_temp_files(tmp_path, genesis_raw):
    store = ChainStore(tmp_path)
    store.write_block(0, genesis_raw)
    store.write_bundle(0, b"{}")
    names = {p.name for p in store.root.iterdir()}
    assert names == {"0.blk", "0.bundle.json"}


def test_store_heights_sorted(tmp_path, genesis_raw):
    store = ChainStore(tmp_path)
    for h in (5, 1, 3):
        store.write_block(h, genesis_raw)
    assert store.heights() == [1, 3, 5]
    assert store.has_block(3) and not store.has_block(2)


# --- dead-branch scripts and redeem checks ------------------------------------------

OP_IF, OP_NOTIF, OP_ELSE, OP_ENDIF, OP_TRUE = 0x63, 0x64, 0x67, 0x68, 0x51


def dead_branch_script(payload: bytes) -> bytes:
    return (bytes([0x00, OP_IF, 0x6A, len(payload)]) + payload
            + bytes([OP_ENDIF, OP_TRUE]))


def test_dead_region_detection_variants():
    p = b"payload"
    # constant-false guard: the arm never runs
    (iv,) = locate_dead_regions(dead_branch_script(p))
    assert iv == ByteInterval(4, 11)
    # constant-true guard: the arm runs, nothing is deletable
    live = bytes([OP_TRUE, OP_IF, 0x6A, len(p)]) + p + bytes([OP_ENDIF])
    assert locate_dead_regions(live) == []
    # OP_NOTIF flips the arm selection
    notif_dead = bytes([OP_TRUE, OP_NOTIF, 0x6A, len(p)]) + p + bytes([OP_ENDIF])
    (iv,) = locate_dead_regions(notif_dead)
    assert len(iv) == len(p)
    # the else arm of a constant-true if is dead
    else_dead = (bytes([OP_TRUE, OP_IF, OP_TRUE, OP_ELSE, 0x6A, len(p)]) + p
                 + bytes([OP_ENDIF]))
    (iv,) = locate_dead_regions(else_dead)
    assert iv.start == 6
    # a stack-dependent guard is not provably dead
    dyn = bytes([0x76, OP_IF, 0x6A, len(p)]) + p + bytes([OP_ENDIF])
    assert locate_dead_regions(dyn) == []
    # nesting: a live inner arm inside a dead outer arm stays dead
    nested = (bytes([0x00, OP_IF, OP_TRUE, OP_IF, 0x6A, len(p)]) + p
              + bytes([OP_ENDIF, OP_ENDIF]))
    (iv,) = locate_dead_regions(nested)
    assert len(iv) == len(p)
    # OP_RETURN outside any conditional is live
    assert locate_dead_regions(bytes([0x6A, len(p)]) + p) == []


def test_redact_script_requires_dead_span():
    payload = bytes(range(70))
    script = dead_branch_script(payload)
    with pytest.raises(ValueError):
        redact_script(script, [(0, 2)])
    zeroed, record = redact_script(script, [(4, 4 + len(payload))], backend="dev")
    assert zeroed[4:4 + 70] == bytes(70)
    assert len(zeroed) == len(script)
    assert record.inner_digest == hashlib.sha256(script).digest()


def test_sighash_redacted_structure():
    out_s, inp_s = b"output script", b"input script"
    assert sighash_redacted(out_s, inp_s) == hashlib.sha256(
        hashlib.sha256(out_s).digest() + hashlib.sha256(inp_s).digest()).digest()


def redeem_fixture(backend="dev"):
    payload = b"never-executed embedded data " + bytes(40)
    script = dead_branch_script(payload)
    private, public = make_simulation_keypair()
    input_script = bytes([OP_TRUE])
    signature = private.sign(sighash_redacted(script, input_script),
                             ec.ECDSA(Prehashed(hashes.SHA256())))
    zeroed, record = redact_script(script, [(4, 4 + len(payload))],
                                   backend=backend)
    return script, zeroed, record, input_script, signature, private, public


def test_verify_redeem_redacted_accepts_valid(genesis_raw):
    script, zeroed, record, inp, sig, priv, pub = redeem_fixture()
    assert verify_redeem_redacted(zeroed, record, inp, sig, pub)
    # signing from the digest alone is equivalent
    sig2 = sign_redeem(priv, hashlib.sha256(script).digest(), inp)
    assert verify_redeem_redacted(zeroed, record, inp, sig2, pub)


def test_verify_redeem_redacted_rejections():
    script, zeroed, record, inp, sig, priv, pub = redeem_fixture()
    # a signature over the legacy whole-script digest
    legacy = priv.sign(hashlib.sha256(script + inp).digest(),
                       ec.ECDSA(Prehashed(hashes.SHA256())))
    assert not verify_redeem_redacted(zeroed, record, inp, legacy, pub)
    # wrong input script
    assert not verify_redeem_redacted(zeroed, record, b"\x52", sig, pub)
    # wrong key
    _, other_pub = make_simulation_keypair()
    assert not verify_redeem_redacted(zeroed, record, inp, sig, other_pub)
    # tampered proof
    cp = record.chunks[0]
    bad = replace(record, chunks=(replace(cp, proof=Proof(
        cp.proof.backend_id, b"\x00" + cp.proof.data[1:])),) + record.chunks[1:])
    assert not verify_redeem_redacted(zeroed, bad, inp, sig, pub)
    # record claiming a span outside the dead region
    shifted = replace(record, intervals=(ByteInterval(1, 3),))
    assert not verify_redeem_redacted(zeroed, shifted, inp, sig, pub)


def test_verify_outcome_helpers():
    assert bool(VerifyOutcome(VALID))
    assert not VerifyOutcome.invalid("x")
    assert VerifyOutcome.invalid("x").reason == "x"

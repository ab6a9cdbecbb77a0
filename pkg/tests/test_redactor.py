"""Redaction requests, proofs per chunk, bundle algebra, and JSON."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import SENTENCE_SPAN, make_tx, op_return_script
from zkredact.hashchain import digest_chain
from zkredact.redactor import (
    BundleError,
    ChunkCapacityExceeded,
    EmptyRequest,
    NotAllowedRegion,
    OverlappingIntervals,
    ProofBundle,
    RedactionError,
    SameChunkTwice,
    build_redaction,
    bundle_digest,
    bundle_from_json,
    bundle_to_json,
    chunk_layouts,
    extract,
    merge_bundles,
    reconstruct_chain,
    splice,
    validate_request,
    zero_fill,
)
from zkredact.txcodec import (
    ByteInterval,
    parse_block,
    parse_transaction,
    serialize_transaction,
    txid,
)


# --- request validation -------------------------------------------------------

def test_validate_request_genesis(genesis_raw):
    tx = parse_block(genesis_raw).transactions[0]
    ivs = validate_request(tx, [SENTENCE_SPAN])
    assert ivs == (ByteInterval(*SENTENCE_SPAN),)


def test_validate_request_sorts(genesis_raw):
    tx = parse_block(genesis_raw).transactions[0]
    ivs = validate_request(tx, [(100, 110), (50, 60)])
    assert [iv.start for iv in ivs] == [50, 100]


def test_validate_request_rejections(genesis_raw):
    tx = parse_block(genesis_raw).transactions[0]
    with pytest.raises(EmptyRequest):
        validate_request(tx, [])
    with pytest.raises(OverlappingIntervals):
        validate_request(tx, [(50, 60), (55, 70)])
    with pytest.raises(NotAllowedRegion):
        validate_request(tx, [(0, 4)])          # version field
    with pytest.raises(NotAllowedRegion):
        validate_request(tx, [(41, 50)])        # one byte before the script
    with pytest.raises(NotAllowedRegion):
        validate_request(tx, [(118, 120)])      # one byte past the script


def test_validate_request_non_coinbase_op_return():
    payload = bytes(range(64))
    raw = make_tx(coinbase=False, script_sig=b"\x51",
                  output_scripts=(op_return_script(payload),))
    tx = parse_transaction(raw)
    region = ByteInterval(raw.index(payload), raw.index(payload) + 64)
    assert validate_request(tx, [(region.start, region.end)]) == (region,)
    with pytest.raises(NotAllowedRegion):
        validate_request(tx, [(region.start - 1, region.end)])   # push length byte


# --- byte-level helpers --------------------------------------------------------

@given(st.binary(min_size=1, max_size=200), st.data())
def test_zero_fill_extract_splice_round_trip(data, draw):
    cuts = draw.draw(st.lists(
        st.integers(0, len(data)), min_size=2, max_size=6).map(sorted))
    ivs = [ByteInterval(a, b) for a, b in zip(cuts[::2], cuts[1::2]) if a < b]
    zeroed = zero_fill(data, ivs)
    deleted = extract(data, ivs)
    assert len(zeroed) == len(data)
    assert all(zeroed[iv.start:iv.end] == bytes(len(iv)) for iv in ivs)
    # splicing the deleted bytes back into each chunk restores the original
    layouts = chunk_layouts(ivs)
    rebuilt = bytearray(zeroed)
    pos = 0
    for ci in sorted(layouts):
        layout = layouts[ci]
        size = sum(e - s for s, e in layout)
        chunk = zeroed[ci * 64:(ci + 1) * 64].ljust(64, b"\x00")
        restored = splice(chunk, layout, deleted[pos:pos + size])
        rebuilt[ci * 64:ci * 64 + len(chunk)] = restored[:len(data) - ci * 64]
        pos += size
    assert bytes(rebuilt) == data


def test_chunk_layouts_splitting():
    layouts = chunk_layouts([ByteInterval(50, 119), ByteInterval(130, 131)])
    assert layouts == {0: ((50, 64),), 1: ((0, 55),), 2: ((2, 3),)}


def test_splice_length_checked():
    with pytest.raises(ValueError):
        splice(bytes(64), ((0, 4),), b"toolong")


# --- proving and verification round trips --------------------------------------

def test_build_redaction_genesis(genesis_raw):
    new_block, record = build_redaction(genesis_raw, 0, [SENTENCE_SPAN],
                                        backend="dev")
    assert len(new_block) == len(genesis_raw)
    assert record.tx_index == 0
    assert record.chunk_indices() == {0, 1}
    assert len(record.chunks) == 2
    tx_raw = serialize_transaction(parse_block(genesis_raw).transactions[0])
    assert record.inner_digest == digest_chain(tx_raw).final_digest()
    # the header, including the merkle root, is byte-identical
    assert new_block[:80] == genesis_raw[:80]
    # zero-filled exactly over the requested span, offset by the tx position
    span = parse_block(genesis_raw).tx_spans[0]
    s, e = SENTENCE_SPAN
    assert new_block[span.start + s:span.start + e] == bytes(e - s)
    assert new_block[:span.start + s] == genesis_raw[:span.start + s]
    assert new_block[span.start + e:] == genesis_raw[span.start + e:]


def test_record_states_chain_correctly(genesis_raw):
    _, record = build_redaction(genesis_raw, 0, [SENTENCE_SPAN], backend="dev")
    tx_raw = serialize_transaction(parse_block(genesis_raw).transactions[0])
    states = digest_chain(tx_raw).states
    for cp in record.chunks:
        assert cp.prev_state == states[cp.index]
        assert cp.next_state == states[cp.index + 1]


def test_reconstruct_chain_with_existing_record(genesis_raw):
    block2, record = build_redaction(genesis_raw, 0, [(64, 119)], backend="dev")
    tx2 = serialize_transaction(parse_block(block2).transactions[0])
    tx_raw = serialize_transaction(parse_block(genesis_raw).transactions[0])
    states = reconstruct_chain(tx2, record)
    assert states == list(digest_chain(tx_raw).states)
    # a record that breaks linkage is refused
    broken = record.chunks[0].__class__(
        index=1, prev_state=record.chunks[0].next_state,
        next_state=record.chunks[0].prev_state, proof=record.chunks[0].proof)
    bad = record.__class__(record.tx_index, record.intervals, (broken,),
                           record.inner_digest)
    with pytest.raises(BundleError):
        reconstruct_chain(tx2, bad)


def test_second_redaction_same_chunk_rejected(genesis_raw):
    block2, record = build_redaction(genesis_raw, 0, [(64, 119)], backend="dev")
    with pytest.raises(SameChunkTwice) as exc:
        build_redaction(block2, 0, [(100, 110)], backend="dev",
                        existing=record)
    assert exc.value.chunk_index == 1
    assert exc.value.tx_index == 0


def test_second_redaction_disjoint_chunk_ok(genesis_raw):
    block2, rec1 = build_redaction(genesis_raw, 0, [(64, 119)], backend="dev")
    block3, rec2 = build_redaction(block2, 0, [(42, 50)], backend="dev",
                                   existing=rec1)
    assert rec1.chunk_indices() == {1} and rec2.chunk_indices() == {0}
    assert rec1.inner_digest == rec2.inner_digest
    span = parse_block(genesis_raw).tx_spans[0]
    assert block3[span.start + 42:span.start + 50] == bytes(8)
    assert block3[span.start + 64:span.start + 119] == bytes(55)


def test_chunk_capacity_guard():
    # an interval spanning beyond what a witness can carry must be refused
    payload = bytes(range(256)) * 3
    raw = make_tx(coinbase=False, script_sig=b"\x51",
                  output_scripts=(op_return_script(payload),))
    block = __import__("conftest").make_block(bytes(32),
                                              [make_tx(script_sig=b"cb"), raw])
    start = block.index(payload)
    try:
        build_redaction(block, 1, [(s, s) for s in ()], backend="dev")
    except RedactionError:
        pass
    # full-payload deletion spans 13 chunks and stays within capacity per chunk
    new_block, record = build_redaction(
        block, 1, [(start_rel := raw.index(payload),
                    start_rel + len(payload))], backend="dev")
    assert len(record.chunks) == len(record.chunk_indices())
    assert all(len(cp.proof.data) == 80 for cp in record.chunks)


# --- bundle algebra -------------------------------------------------------------

def two_disjoint_records(genesis_raw):
    block2, rec1 = build_redaction(genesis_raw, 0, [(64, 119)], backend="dev")
    block3, rec2 = build_redaction(block2, 0, [(42, 50)], backend="dev",
                                   existing=rec1)
    return block3, rec1, rec2


def test_merge_bundles_unions_records(genesis_raw):
    block3, rec1, rec2 = two_disjoint_records(genesis_raw)
    h = parse_block(genesis_raw).block_hash()
    merged = merge_bundles(ProofBundle(h, "dev", (rec1,)),
                           ProofBundle(h, "dev", (rec2,)))
    (rec,) = merged.records
    assert rec.chunk_indices() == {0, 1}
    assert {iv.start for iv in rec.intervals} == {42, 64}
    assert rec.inner_digest == rec1.inner_digest


def test_merge_bundles_same_chunk_rejected(genesis_raw):
    _, rec1 = build_redaction(genesis_raw, 0, [(50, 60)], backend="dev")
    _, rec2 = build_redaction(genesis_raw, 0, [(60, 70)], backend="dev")
    h = parse_block(genesis_raw).block_hash()
    with pytest.raises(SameChunkTwice):
        merge_bundles(ProofBundle(h, "dev", (rec1,)),
                      ProofBundle(h, "dev", (rec2,)))


def test_merge_bundles_mismatches_rejected(genesis_raw):
    _, rec1 = build_redaction(genesis_raw, 0, [(64, 119)], backend="dev")
    h = parse_block(genesis_raw).block_hash()
    with pytest.raises(BundleError):
        merge_bundles(ProofBundle(h, "dev", (rec1,)),
                      ProofBundle(bytes(32), "dev", (rec1,)))
    with pytest.raises(BundleError):
        merge_bundles(ProofBundle(h, "dev", (rec1,)),
                      ProofBundle(h, "sound", (rec1,)))


def test_merge_keeps_distinct_transactions_separate(genesis_raw):
    _, rec1 = build_redaction(genesis_raw, 0, [(64, 119)], backend="dev")
    rec_other = rec1.__class__(5, rec1.intervals, rec1.chunks, rec1.inner_digest)
    h = parse_block(genesis_raw).block_hash()
    merged = merge_bundles(ProofBundle(h, "dev", (rec1,)),
                           ProofBundle(h, "dev", (rec_other,)))
    assert sorted(r.tx_index for r in merged.records) == [0, 5]


# --- JSON encoding ---------------------------------------------------------------

def test_bundle_json_round_trip(genesis_raw):
    _, record = build_redaction(genesis_raw, 0, [SENTENCE_SPAN], backend="dev")
    bundle = ProofBundle(parse_block(genesis_raw).block_hash(), "dev", (record,))
    raw = bundle_to_json(bundle)
    again = bundle_from_json(raw)
    assert again == bundle
    assert bundle_to_json(again) == raw
    assert bundle_digest(raw) != bundle_digest(raw + b" ")


def test_bundle_json_is_canonical(genesis_raw):
    _, record = build_redaction(genesis_raw, 0, [SENTENCE_SPAN], backend="dev",
                                seed=b"j" * 32)
    bundle = ProofBundle(parse_block(genesis_raw).block_hash(), "dev", (record,))
    raw = bundle_to_json(bundle)
    doc = json.loads(raw)
    assert raw == json.dumps(doc, sort_keys=True,
                             separators=(",", ":")).encode()
    assert doc["field_prime"] == "0xffffffff00000001"
    assert doc["backend"] == "dev"
    assert [r["tx_index"] for r in doc["records"]] == [0]


@pytest.mark.parametrize("mutate", [
    lambda d: d.__setitem__("field_prime", "0x1"),
    lambda d: d.__setitem__("backend", "bogus"),
    lambda d: d["records"][0].__setitem__("intervals", [[60, 50]]),
    lambda d: d["records"][0]["chunks"][0].__setitem__("prev_state", [1] * 7),
    lambda d: d["records"][0].__setitem__("inner_digest", "zz"),
])
def test_bundle_json_rejects_malformed(genesis_raw, mutate):
    _, record = build_redaction(genesis_raw, 0, [SENTENCE_SPAN], backend="dev")
    bundle = ProofBundle(parse_block(genesis_raw).block_hash(), "dev", (record,))
    doc = json.loads(bundle_to_json(bundle))
    mutate(doc)
    with pytest.raises(BundleError):
        bundle_from_json(json.dumps(doc).encode())


def test_bundle_from_json_rejects_garbage():
    with pytest.raises(BundleError):
        bundle_from_json(b"not json")
    with pytest.raises(BundleError):
        bundle_from_json(b"{}")

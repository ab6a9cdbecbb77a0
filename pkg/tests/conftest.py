import random

import pytest
from hypothesis import HealthCheck, settings

from zkredact.hashchain import merkle_root
from zkredact.txcodec import (
    COINBASE_PREV_INDEX,
    COINBASE_PREV_TXID,
    BlockHeader,
    OP_RETURN,
    parse_block,
    txid,
    write_varint,
)

settings.register_profile(
    "default", deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Bitcoin block 0, the classic 204-byte coinbase fixture.
GENESIS_HEX = (
    "0100000000000000000000000000000000000000000000000000000000000000"
    "000000003ba3edfd7a7b12b27ac72c3e67768f617fc81bc3888a51323a9fb8aa"
    "4b1e5e4a29ab5f49ffff001d1dac2b7c01010000000100000000000000000000"
    "00000000000000000000000000000000000000000000ffffffff4d04ffff001d"
    "0104455468652054696d65732030332f4a616e2f32303039204368616e63656c"
    "6c6f72206f6e206272696e6b206f66207365636f6e64206261696c6f75742066"
    "6f722062616e6b73ffffffff0100f2052a01000000434104678afdb0fe554827"
    "1967f1a67130b7105cd6a828e03909a67962e0ea1f61deb649f6bc3f4cef38c4"
    "f35504e51ec112de5c384df7ba0b8d578a4c702b6bf11d5fac00000000")
GENESIS_RAW = bytes.fromhex(GENESIS_HEX)

# the 69-byte sentence inside the genesis coinbase scriptSig
SENTENCE_SPAN = (50, 119)


@pytest.fixture
def genesis_raw() -> bytes:
    return GENESIS_RAW


def make_tx(*, script_sig: bytes = b"", output_scripts=(b"\x51",),
            coinbase: bool = True, prev_txid: bytes | None = None,
            prev_index: int | None = None, value: int = 50_0000_0000,
            sequence: int = 0xFFFFFFFF, locktime: int = 0) -> bytes:
    """One-input raw transaction in legacy wire format."""
    if prev_txid is None:
        prev_txid = COINBASE_PREV_TXID if coinbase else bytes(range(32))
    if prev_index is None:
        prev_index = COINBASE_PREV_INDEX if coinbase else 0
    parts = [
        (1).to_bytes(4, "little", signed=True),
        write_varint(1),
        prev_txid, prev_index.to_bytes(4, "little"),
        write_varint(len(script_sig)), script_sig,
        sequence.to_bytes(4, "little"),
        write_varint(len(output_scripts)),
    ]
    for script in output_scripts:
        parts += [value.to_bytes(8, "little"),
                  write_varint(len(script)), script]
    parts.append(locktime.to_bytes(4, "little"))
    return b"".join(parts)


def op_return_script(payload: bytes) -> bytes:
    if len(payload) <= 0x4B:
        return bytes([OP_RETURN, len(payload)]) + payload
    if len(payload) <= 0xFF:
        return bytes([OP_RETURN, 0x4C, len(payload)]) + payload
    return bytes([OP_RETURN, 0x4D]) + len(payload).to_bytes(2, "little") + payload


def make_block(prev_hash: bytes, raw_txs: list[bytes],
               time: int = 1231006505, nonce: int = 0) -> bytes:
    root = merkle_root([txid(tx) for tx in raw_txs])
    header = BlockHeader(1, prev_hash, root, time, 0x1D00FFFF, nonce)
    return header.serialize() + write_varint(len(raw_txs)) + b"".join(raw_txs)


def make_chain(payloads_per_block: list[list[bytes]],
               start_time: int = 1231006505) -> list[bytes]:
    """Linked blocks, each with a coinbase and one OP_RETURN tx per payload."""
    blocks = []
    prev = bytes(32)
    for height, payloads in enumerate(payloads_per_block):
        txs = [make_tx(script_sig=f"height {height} extra nonce".encode())]
        for i, payload in enumerate(payloads):
            txs.append(make_tx(coinbase=False,
                               prev_txid=bytes([height + 1]) * 32,
                               prev_index=i,
                               script_sig=b"\x51",
                               output_scripts=(op_return_script(payload),)))
        block = make_block(prev, txs, time=start_time + height)
        blocks.append(block)
        prev = parse_block(block).block_hash()
    return blocks


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0x5EED)

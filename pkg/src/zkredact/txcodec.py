"""Byte-exact codec for legacy Bitcoin-format transactions and blocks.

Wire layout (all integers little-endian):

    transaction   version i32 | varint #in | inputs | varint #out | outputs
                  | locktime u32
    input         prev txid 32 | prev index u32 | varint len | scriptSig
                  | sequence u32
    output        value u64 | varint len | scriptPubKey
    block         header 80 | varint #tx | transactions
    header        version i32 | prev hash 32 | merkle root 32 | time u32
                  | bits u32 | nonce u32

Parsing records the absolute offset of every script so redaction can
address bytes of the original serialization directly.  Varints must be
minimal, witness serialization (marker 0x00, flag 0x01) is rejected, and
serialize(parse(raw)) == raw holds for every accepted input.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .hashchain import double_sha256

OP_RETURN = 0x6A
OP_PUSHDATA1 = 0x4C
OP_PUSHDATA2 = 0x4D
OP_PUSHDATA4 = 0x4E

COINBASE_PREV_TXID = b"\x00" * 32
COINBASE_PREV_INDEX = 0xFFFFFFFF


class TxCodecError(ValueError):
    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None
                         else f"{message} (at byte {offset})")
        self.offset = offset


class TruncatedInput(TxCodecError):
    pass


class VarintOverflow(TxCodecError):
    pass


class TrailingBytes(TxCodecError):
    pass


class WitnessNotSupported(TxCodecError):
    pass


class MalformedScript(TxCodecError):
    pass


@dataclass(frozen=True)
class ByteInterval:
    """Half-open byte range [start, end) in a serialized object."""

    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid interval [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "ByteInterval") -> bool:
        return self.start < other.end and other.start < self.end

    def contains(self, other: "ByteInterval") -> bool:
        return self.start <= other.start and other.end <= self.end


class _Reader:
    def __init__(self, raw: bytes, offset: int = 0):
        self.raw = raw
        self.pos = offset

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise TruncatedInput(
                f"need {n} more bytes, have {len(self.raw) - self.pos}", self.pos)
        out = self.raw[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "little")

    def i32(self) -> int:
        return int.from_bytes(self.take(4), "little", signed=True)

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "little")

    def varint(self) -> int:
        start = self.pos
        tag = self.take(1)[0]
        if tag < 0xFD:
            return tag
        width, floor = {0xFD: (2, 0xFD), 0xFE: (4, 0x10000), 0xFF: (8, 0x100000000)}[tag]
        value = int.from_bytes(self.take(width), "little")
        if value < floor:
            raise VarintOverflow(f"non-minimal varint encoding of {value}", start)
        return value


def write_varint(value: int) -> bytes:
    if value < 0:
        raise ValueError("varint must be non-negative")
    if value < 0xFD:
        return bytes([value])
    if value <= 0xFFFF:
        return b"\xfd" + value.to_bytes(2, "little")
    if value <= 0xFFFFFFFF:
        return b"\xfe" + value.to_bytes(4, "little")
    if value <= 0xFFFFFFFFFFFFFFFF:
        return b"\xff" + value.to_bytes(8, "little")
    raise ValueError("varint exceeds 8 bytes")


def read_varint(raw: bytes, offset: int = 0) -> tuple[int, int]:
    """Decode one minimal varint; returns (value, bytes consumed)."""
    r = _Reader(raw, offset)
    value = r.varint()
    return value, r.pos - offset


@dataclass(frozen=True)
class TxIn:
    prev_txid: bytes
    prev_index: int
    script_sig: bytes
    sequence: int
    script_offset: int = -1   # absolute offset of script_sig in the source tx


@dataclass(frozen=True)
class TxOut:
    value: int
    script_pubkey: bytes
    script_offset: int = -1


@dataclass(frozen=True)
class ParsedTransaction:
    version: int
    inputs: tuple[TxIn, ...]
    outputs: tuple[TxOut, ...]
    locktime: int

    @property
    def size(self) -> int:
        return len(serialize_transaction(self))


def _parse_tx(r: _Reader, base: int) -> ParsedTransaction:
    version = r.i32()
    n_in = r.varint()
    if n_in == 0:
        nxt = r.raw[r.pos:r.pos + 1]
        if nxt == b"\x01":
            raise WitnessNotSupported(
                "witness serialization (marker 0x00, flag 0x01) is not supported",
                r.pos - 1)
        raise TxCodecError("transaction has no inputs", r.pos - 1)
    inputs = []
    for _ in range(n_in):
        prev_txid = r.take(32)
        prev_index = r.u32()
        slen = r.varint()
        soff = r.pos - base
        script = r.take(slen)
        seq = r.u32()
        inputs.append(TxIn(prev_txid, prev_index, script, seq, soff))
    n_out = r.varint()
    outputs = []
    for _ in range(n_out):
        value = r.u64()
        slen = r.varint()
        soff = r.pos - base
        script = r.take(slen)
        outputs.append(TxOut(value, script, soff))
    locktime = r.u32()
    return ParsedTransaction(version, tuple(inputs), tuple(outputs), locktime)


def parse_transaction(raw: bytes) -> ParsedTransaction:
    r = _Reader(raw)
    tx = _parse_tx(r, 0)
    if r.pos != len(raw):
        raise TrailingBytes(f"{len(raw) - r.pos} bytes after transaction", r.pos)
    return tx


def serialize_transaction(tx: ParsedTransaction) -> bytes:
    parts = [tx.version.to_bytes(4, "little", signed=True), write_varint(len(tx.inputs))]
    for txin in tx.inputs:
        parts.append(txin.prev_txid)
        parts.append(txin.prev_index.to_bytes(4, "little"))
        parts.append(write_varint(len(txin.script_sig)))
        parts.append(txin.script_sig)
        parts.append(txin.sequence.to_bytes(4, "little"))
    parts.append(write_varint(len(tx.outputs)))
    for txout in tx.outputs:
        parts.append(txout.value.to_bytes(8, "little"))
        parts.append(write_varint(len(txout.script_pubkey)))
        parts.append(txout.script_pubkey)
    parts.append(tx.locktime.to_bytes(4, "little"))
    return b"".join(parts)


def is_coinbase(tx: ParsedTransaction) -> bool:
    """Exactly one input spending the null outpoint."""
    return (len(tx.inputs) == 1
            and tx.inputs[0].prev_txid == COINBASE_PREV_TXID
            and tx.inputs[0].prev_index == COINBASE_PREV_INDEX)


def txid(tx: ParsedTransaction | bytes) -> bytes:
    """Double SHA-256 of the serialization, internal byte order."""
    raw = tx if isinstance(tx, bytes) else serialize_transaction(tx)
    return double_sha256(raw)


def format_txid(digest: bytes) -> str:
    """Display form: byte-reversed hex."""
    return digest[::-1].hex()


def iter_script(script: bytes):
    """Yield (opcode, payload_start, payload_len, next_offset) per instruction.

    Raises MalformedScript when a push runs past the end of the script.
    """
    i = 0
    n = len(script)
    while i < n:
        op = script[i]
        if 0x01 <= op <= 0x4B:
            start, plen, nxt = i + 1, op, i + 1 + op
        elif op == OP_PUSHDATA1:
            if i + 2 > n:
                raise MalformedScript("OP_PUSHDATA1 missing length byte", i)
            plen = script[i + 1]
            start, nxt = i + 2, i + 2 + plen
        elif op == OP_PUSHDATA2:
            if i + 3 > n:
                raise MalformedScript("OP_PUSHDATA2 missing length bytes", i)
            plen = int.from_bytes(script[i + 1:i + 3], "little")
            start, nxt = i + 3, i + 3 + plen
        elif op == OP_PUSHDATA4:
            if i + 5 > n:
                raise MalformedScript("OP_PUSHDATA4 missing length bytes", i)
            plen = int.from_bytes(script[i + 1:i + 5], "little")
            start, nxt = i + 5, i + 5 + plen
        else:
            start, plen, nxt = i + 1, 0, i + 1
        if nxt > n:
            raise MalformedScript("push length exceeds script bounds", i)
        yield op, start, plen, nxt
        i = nxt


def _op_return_payloads(script: bytes) -> list[tuple[int, int]]:
    """[start, end) spans of payloads pushed right after OP_RETURN."""
    spans = []
    want_push = False
    for op, start, plen, nxt in iter_script(script):
        if want_push:
            want_push = False
            if op == OP_PUSHDATA4:
                raise MalformedScript(
                    "OP_PUSHDATA4 after OP_RETURN is nonstandard", start - 5)
            if (0x01 <= op <= 0x4B or op in (OP_PUSHDATA1, OP_PUSHDATA2)) and plen:
                spans.append((start, start + plen))
                continue
        if op == OP_RETURN:
            want_push = True
    return spans


def locate_allowed_regions(tx: ParsedTransaction) -> list[ByteInterval]:
    """Byte ranges of the serialization that may be deleted.

    Two kinds exist: the whole coinbase scriptSig, and the payload bytes
    (never opcodes or length prefixes) pushed after OP_RETURN in output
    scripts.  Offsets refer to the transaction serialization.
    """
    regions = []
    if is_coinbase(tx):
        txin = tx.inputs[0]
        if txin.script_sig:
            regions.append(ByteInterval(txin.script_offset,
                                        txin.script_offset + len(txin.script_sig)))
    for txout in tx.outputs:
        for start, end in _op_return_payloads(txout.script_pubkey):
            regions.append(ByteInterval(txout.script_offset + start,
                                        txout.script_offset + end))
    return sorted(regions, key=lambda r: r.start)


def coinbase_height_span(tx: ParsedTransaction) -> ByteInterval | None:
    """Span of the first scriptSig push (the BIP34 height slot), if any."""
    if not is_coinbase(tx):
        return None
    script = tx.inputs[0].script_sig
    try:
        for op, start, plen, nxt in iter_script(script):
            if 0x01 <= op <= 0x4B:
                return ByteInterval(tx.inputs[0].script_offset,
                                    tx.inputs[0].script_offset + nxt)
            return None
    except MalformedScript:
        return None
    return None


@dataclass(frozen=True)
class BlockHeader:
    version: int
    prev_block_hash: bytes
    merkle_root: bytes
    time: int
    bits: int
    nonce: int

    def serialize(self) -> bytes:
        return (self.version.to_bytes(4, "little", signed=True)
                + self.prev_block_hash + self.merkle_root
                + self.time.to_bytes(4, "little")
                + self.bits.to_bytes(4, "little")
                + self.nonce.to_bytes(4, "little"))

    def hash(self) -> bytes:
        return double_sha256(self.serialize())


@dataclass(frozen=True)
class ParsedBlock:
    header: BlockHeader
    transactions: tuple[ParsedTransaction, ...]
    tx_spans: tuple[ByteInterval, ...]   # offsets of each tx in the block bytes

    def block_hash(self) -> bytes:
        return self.header.hash()


class TxParseError(TxCodecError):
    def __init__(self, tx_index: int, cause: TxCodecError):
        super().__init__(f"transaction {tx_index}: {cause}")
        self.tx_index = tx_index
        self.cause = cause


def parse_block(raw: bytes) -> ParsedBlock:
    r = _Reader(raw)
    hdr_bytes = r.take(80)
    header = BlockHeader(
        version=int.from_bytes(hdr_bytes[0:4], "little", signed=True),
        prev_block_hash=hdr_bytes[4:36],
        merkle_root=hdr_bytes[36:68],
        time=int.from_bytes(hdr_bytes[68:72], "little"),
        bits=int.from_bytes(hdr_bytes[72:76], "little"),
        nonce=int.from_bytes(hdr_bytes[76:80], "little"),
    )
    n_tx = r.varint()
    txs = []
    spans = []
    for i in range(n_tx):
        start = r.pos
        try:
            txs.append(_parse_tx(r, start))
        except TxCodecError as exc:
            raise TxParseError(i, exc) from exc
        spans.append(ByteInterval(start, r.pos))
    if r.pos != len(raw):
        raise TrailingBytes(f"{len(raw) - r.pos} bytes after block", r.pos)
    return ParsedBlock(header, tuple(txs), tuple(spans))


def serialize_block(block: ParsedBlock) -> bytes:
    parts = [block.header.serialize(), write_varint(len(block.transactions))]
    for tx in block.transactions:
        parts.append(serialize_transaction(tx))
    return b"".join(parts)


def replace_transaction(block_raw: bytes, block: ParsedBlock, tx_index: int,
                        new_tx_raw: bytes) -> bytes:
    """Splice replacement bytes for one transaction into the block bytes.

    The replacement must keep the byte length, which redaction always does.
    """
    span = block.tx_spans[tx_index]
    if len(new_tx_raw) != len(span):
        raise ValueError("replacement transaction changes the byte length")
    return block_raw[:span.start] + new_tx_raw + block_raw[span.end:]

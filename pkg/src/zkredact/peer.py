"""Serve and fetch block ranges over TCP, verifying while downloading.

One frame per message: a 4-byte big-endian length, then a type byte, then
the payload.  A client asks for an inclusive height range; the server
answers each height with its bundle (when one exists) followed by the
block, and closes the range with an end marker.  The client verifies every
block as it arrives, so a bad peer is caught at the first block it cannot
justify, not after the download.
"""

from __future__ import annotations

import socket
import socketserver
import struct
import threading

from .chainsync import ChainStore, VerifyOutcome, verify_block
from .redactor import bundle_from_json
from .txcodec import TxCodecError, parse_block

MAX_FRAME = 8 * 1024 * 1024

MSG_GET_RANGE = 0x01
MSG_BLOCK = 0x02
MSG_BUNDLE = 0x03
MSG_END = 0x04
MSG_ERROR = 0x7F


class ProtocolViolation(Exception):
    """The peer broke framing or message ordering."""


class VerificationFailed(Exception):
    """A fetched block did not verify; nothing past it was accepted."""

    def __init__(self, height: int, outcome: VerifyOutcome):
        super().__init__(f"block {height} failed verification: {outcome.reason}")
        self.height = height
        self.outcome = outcome


def _send_frame(sock: socket.socket, msg_type: int, payload: bytes = b""):
    if 1 + len(payload) > MAX_FRAME:
        raise ProtocolViolation(f"refusing to send {len(payload)} byte frame")
    sock.sendall(struct.pack(">I", 1 + len(payload)) + bytes([msg_type]) + payload)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        part = sock.recv(n - len(buf))
        if not part:
            raise ProtocolViolation("connection closed mid-frame")
        buf += part
    return bytes(buf)


def _recv_frame(sock: socket.socket) -> tuple[int, bytes]:
    (length,) = struct.unpack(">I", _recv_exact(sock, 4))
    if not 1 <= length <= MAX_FRAME:
        raise ProtocolViolation(f"frame length {length} out of bounds")
    body = _recv_exact(sock, length)
    return body[0], body[1:]


def _height_payload(payload: bytes) -> tuple[int, bytes]:
    if len(payload) < 4:
        raise ProtocolViolation("height-carrying frame shorter than 4 bytes")
    return struct.unpack(">I", payload[:4])[0], payload[4:]


class _RangeHandler(socketserver.BaseRequestHandler):
    def handle(self):
        store: ChainStore = self.server.store
        sock = self.request
        sock.settimeout(30)
        try:
            mtype, payload = _recv_frame(sock)
            if mtype != MSG_GET_RANGE or len(payload) != 8:
                _send_frame(sock, MSG_ERROR, b"expected a range request")
                return
            first, last = struct.unpack(">II", payload)
            if first > last:
                _send_frame(sock, MSG_ERROR, b"empty range")
                return
            for height in range(first, last + 1):
                if not store.has_block(height):
                    _send_frame(sock, MSG_ERROR,
                                f"height {height} not available".encode())
                    return
                head = struct.pack(">I", height)
                bundle_raw = store.read_bundle_bytes(height)
                if bundle_raw is not None:
                    _send_frame(sock, MSG_BUNDLE, head + bundle_raw)
                _send_frame(sock, MSG_BLOCK, head + store.read_block(height))
            _send_frame(sock, MSG_END)
        except (ProtocolViolation, OSError):
            pass


class PeerServer:
    """Background server for a chain store; close() releases the port."""

    def __init__(self, store: ChainStore, host: str = "127.0.0.1", port: int = 0):
        class _Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = _Server((host, port), _RangeHandler)
        self._server.store = store
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return host, port

    def close(self):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "PeerServer":
        return self

    def __exit__(self, *exc):
        self.close()


def serve(store: ChainStore, host: str = "127.0.0.1", port: int = 0) -> PeerServer:
    return PeerServer(store, host, port)


def fetch_and_verify(address: tuple[str, int], first_height: int,
                     last_height: int, store: ChainStore | None = None,
                     timeout: float = 30.0) -> dict[int, VerifyOutcome]:
    """Download an inclusive height range, verifying each block on arrival.

    Raises VerificationFailed at the first block whose bytes, bundle, or
    header linkage do not check out, and ProtocolViolation when the peer
    misbehaves.  Verified blocks are written to `store` as they pass,
    bundle before block.
    """
    if first_height < 0 or first_height > last_height:
        raise ValueError("need 0 <= first_height <= last_height")
    outcomes: dict[int, VerifyOutcome] = {}
    prev_hash: bytes | None = None
    expected = first_height
    pending: dict[int, bytes] = {}
    with socket.create_connection(address, timeout=timeout) as sock:
        sock.settimeout(timeout)
        _send_frame(sock, MSG_GET_RANGE,
                    struct.pack(">II", first_height, last_height))
        while True:
            mtype, payload = _recv_frame(sock)
            if mtype == MSG_END:
                break
            if mtype == MSG_ERROR:
                raise ProtocolViolation(
                    "peer error: " + payload.decode("utf-8", "replace"))
            if mtype == MSG_BUNDLE:
                height, bundle_raw = _height_payload(payload)
                if height != expected or height in pending:
                    raise ProtocolViolation(f"unexpected bundle for {height}")
                pending[height] = bundle_raw
                continue
            if mtype != MSG_BLOCK:
                raise ProtocolViolation(f"unexpected message type {mtype:#04x}")
            height, block_raw = _height_payload(payload)
            if height != expected:
                raise ProtocolViolation(
                    f"got block {height}, expected {expected}")
            bundle_raw = pending.pop(height, None)
            try:
                bundle = (None if bundle_raw is None
                          else bundle_from_json(bundle_raw))
            except ValueError as exc:
                raise VerificationFailed(
                    height, VerifyOutcome.invalid(f"bad bundle: {exc}")) from exc
            outcome = verify_block(block_raw, bundle, prev_hash)
            if not outcome:
                raise VerificationFailed(height, outcome)
            outcomes[height] = outcome
            if store is not None:
                if bundle_raw is not None:
                    store.write_bundle(height, bundle_raw)
                store.write_block(height, block_raw)
            try:
                prev_hash = parse_block(block_raw).block_hash()
            except TxCodecError:   # unreachable after a passing verify
                raise VerificationFailed(height, VerifyOutcome.invalid(
                    "block does not parse"))
            expected += 1
    if expected != last_height + 1:
        raise ProtocolViolation("peer ended the stream early")
    return outcomes

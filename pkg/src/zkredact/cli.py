"""Command line entry points.

Subcommands wrap the library end to end: `regions` lists the deletable
spans of a transaction, `redact` deletes bytes and writes the proof bundle
plus the rewritten block atomically, `verify` replays a store's chain,
`serve`/`fetch` move ranges between stores with verification on arrival,
and `quality` evaluates the voting bounds in exact rational arithmetic.

Exit codes: 0 success (and every verified block valid), 1 a block or fetch
failed verification, 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import sys
import threading
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .chainsync import ChainStore, VerifyOutcome, verify_block, verify_chain
from .redactor import (
    BundleError,
    ProofBundle,
    RedactionError,
    build_redaction,
    merge_bundles,
)
from .txcodec import (
    ByteInterval,
    TxCodecError,
    coinbase_height_span,
    is_coinbase,
    locate_allowed_regions,
    parse_block,
    parse_transaction,
)
from .zkbackend import UnknownBackend, available_backends


class OutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class QualityBound:
    """Voting bound for an approval threshold f of honest hash power."""

    threshold: Fraction      # approval fraction a redaction must reach
    min_attacker: Fraction   # smallest adversary share that always reaches it


def quality_bound(f) -> QualityBound:
    """Smallest adversarial hash share that can force approval at threshold f.

    An adversary holding share t sustains up to t/(1-t) of the chain against
    honest miners, so forcing an f-approval needs t with t/(1-t) >= f, i.e.
    t >= f/(1+f).  Exact rationals throughout; requires 1/2 < f < 1.
    """
    f = Fraction(f)
    if not Fraction(1, 2) < f < 1:
        raise OutOfRange(f"threshold must be strictly between 1/2 and 1, got {f}")
    return QualityBound(f, f / (1 + f))


def chain_fraction(t) -> Fraction:
    """Largest chain share an adversary with hash share t can sustain: t/(1-t)."""
    t = Fraction(t)
    if not 0 <= t < 1:
        raise OutOfRange(f"hash share must lie in [0, 1), got {t}")
    return t / (1 - t)


def _parse_intervals(text: str) -> list[tuple[int, int]]:
    """`start..end` spans (end exclusive), comma separated."""
    spans = []
    for part in text.split(","):
        try:
            a, b = part.split("..")
            spans.append((int(a), int(b)))
        except ValueError:
            raise OutOfRange(f"bad interval {part!r}, expected start..end") from None
    return spans


def _parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise OutOfRange(f"bad endpoint {text!r}, expected host:port")
    return host or "127.0.0.1", int(port)


def _outcome_line(height: int, outcome: VerifyOutcome) -> str:
    line = f"height={height} verdict={outcome.status}"
    if outcome.status == "valid_with_redactions":
        line += (f" redacted_transactions={outcome.redacted_transactions}"
                 f" proved_chunks={outcome.proved_chunks}")
    if outcome.reason:
        line += f' reason="{outcome.reason}"'
    return line


def _read_tx_bytes(path: str, hex_io: bool) -> bytes:
    raw = sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()
    if hex_io:
        return bytes.fromhex(raw.decode("ascii").strip())
    return raw


def cmd_regions(args) -> int:
    tx = parse_transaction(_read_tx_bytes(args.tx_file, args.hex))
    coinbase_span = None
    if is_coinbase(tx) and tx.inputs[0].script_sig:
        off = tx.inputs[0].script_offset
        coinbase_span = ByteInterval(off, off + len(tx.inputs[0].script_sig))
    for region in locate_allowed_regions(tx):
        kind = ("coinbase_scriptsig" if coinbase_span == region
                else "op_return_payload")
        print(f"start={region.start} end={region.end} "
              f"length={len(region)} kind={kind}")
    return 0


def cmd_redact(args) -> int:
    store = ChainStore(args.store)
    if not store.has_block(args.height):
        print(f"error: no block at height {args.height} in {store.root}",
              file=sys.stderr)
        return 2
    block_raw = store.read_block(args.height)
    ivs = _parse_intervals(args.intervals)
    seed = bytes.fromhex(args.seed) if args.seed else None

    existing = store.read_bundle(args.height)
    existing_record = existing.record_for(args.tx_index) if existing else None

    block = parse_block(block_raw)
    if 0 <= args.tx_index < len(block.transactions):
        tx = block.transactions[args.tx_index]
        span = coinbase_height_span(tx)
        if span and any(span.overlaps(ByteInterval(a, b)) for a, b in ivs):
            print("warning: redacting the first coinbase push, which by "
                  "convention encodes the block height", file=sys.stderr)

    new_block, record = build_redaction(block_raw, args.tx_index, ivs,
                                        backend=args.backend,
                                        existing=existing_record, seed=seed)
    bundle = ProofBundle(block.block_hash(), args.backend, (record,))
    if existing is not None:
        bundle = merge_bundles(existing, bundle)
    store.apply_redaction(args.height, new_block, bundle)
    print(f"height={args.height} tx={args.tx_index} "
          f"intervals={len(record.intervals)} proved_chunks={len(record.chunks)} "
          f"backend={args.backend}")
    return 0


def cmd_verify(args) -> int:
    store = ChainStore(args.store)
    if args.height is not None:
        if not store.has_block(args.height):
            print(f"error: no block at height {args.height}", file=sys.stderr)
            return 2
        try:
            bundle = store.read_bundle(args.height)
        except BundleError as exc:
            print(_outcome_line(args.height, VerifyOutcome.invalid(str(exc))))
            return 1
        outcome = verify_block(store.read_block(args.height), bundle)
        print(_outcome_line(args.height, outcome))
        return 0 if outcome else 1
    report = verify_chain(store)
    for height in sorted(report.outcomes):
        print(_outcome_line(height, report.outcomes[height]))
    if not report.outcomes:
        print(f"error: store {store.root} has no blocks", file=sys.stderr)
        return 2
    return 0 if report.ok else 1


def cmd_serve(args) -> int:
    from .peer import serve

    store = ChainStore(args.store)
    server = serve(store, *_parse_endpoint(args.listen))
    host, port = server.address
    print(f"serving {store.root} on {host}:{port}", flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


def cmd_fetch(args) -> int:
    from .peer import ProtocolViolation, VerificationFailed, fetch_and_verify

    try:
        first, last = _parse_intervals(args.range)[0]
    except OutOfRange:
        raise OutOfRange(f"bad range {args.range!r}, expected first..last "
                         "(heights, inclusive)") from None
    store = ChainStore(args.store)
    try:
        outcomes = fetch_and_verify(_parse_endpoint(args.connect), first, last,
                                    store=store)
    except VerificationFailed as exc:
        print(_outcome_line(exc.height, exc.outcome))
        return 1
    except ProtocolViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for height in sorted(outcomes):
        print(_outcome_line(height, outcomes[height]))
    return 0


def cmd_quality(args) -> int:
    bound = quality_bound(Fraction(args.threshold))
    print(f"threshold={bound.threshold} min_attacker={bound.min_attacker}")
    if args.attacker is not None:
        reach = chain_fraction(Fraction(args.attacker))
        verdict = "succeeds" if reach >= bound.threshold else "fails"
        print(f"attacker={Fraction(args.attacker)} chain_fraction={reach} "
              f"attack={verdict}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zkredact",
        description="Delete data from block payloads with proofs that the "
                    "chain still verifies.")
    parser.add_argument("--store", default="chainstore", metavar="DIR",
                        help="chain store directory (default: ./chainstore)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("regions", help="list deletable spans of a transaction")
    p.add_argument("tx_file", help="raw transaction file, or - for stdin")
    p.add_argument("--hex", action="store_true",
                   help="input is hex text instead of raw bytes")
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("redact", help="delete bytes from a stored block")
    p.add_argument("height", type=int)
    p.add_argument("tx_index", type=int)
    p.add_argument("intervals",
                   help="byte spans start..end (end exclusive), comma separated")
    p.add_argument("--backend", default="sound", choices=available_backends())
    p.add_argument("--seed", metavar="HEX",
                   help="deterministic proof randomness (testing only)")
    p.set_defaults(func=cmd_redact)

    p = sub.add_parser("verify", help="verify stored blocks and their bundles")
    p.add_argument("--height", type=int, default=None,
                   help="verify one height instead of the whole store")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("serve", help="serve the store to peers")
    p.add_argument("--listen", default="127.0.0.1:0", metavar="HOST:PORT")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("fetch", help="download and verify a height range")
    p.add_argument("--connect", required=True, metavar="HOST:PORT")
    p.add_argument("--range", required=True, metavar="FIRST..LAST",
                   help="height range, inclusive")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("quality", help="voting bounds for redaction approval")
    p.add_argument("--threshold", required=True, metavar="F",
                   help="required approval fraction, e.g. 2/3")
    p.add_argument("--attacker", default=None, metavar="T",
                   help="adversary hash share to evaluate, e.g. 2/5")
    p.set_defaults(func=cmd_quality)
    return parser


def run_cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (TxCodecError, RedactionError, BundleError, UnknownBackend,
            OutOfRange, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()

"""Local redaction of Bitcoin-format chains with verifiable consistency proofs.

The package splits into:

    txcodec     byte-exact transaction and block codec, allowed-region scan
    hashchain   decomposed SHA-256 (chunk states) and Merkle roots
    zkbackend   constraint system, chunk circuit, dev and sound proof backends
    redactor    redaction requests, proof bundles, bundle merging
    chainsync   block/chain verification, redeem checks, peer sync
    cli         command line front end
"""

__version__ = "0.1.0"

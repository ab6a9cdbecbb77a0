"""Compiled circuits against pinned golden digests.

Any change to the constraint layout, wire ordering, or serialization shows
up here.  To accept an intentional change, rerun with
ZKREDACT_UPDATE_GOLDENS=1 and commit the rewritten manifest.
"""

import json
import os
from pathlib import Path

from zkredact.zkbackend import compile_chunk_circuit

MANIFEST = Path(__file__).resolve().parent.parent / "circuits" / "manifest.json"


def _layout_from_key(key: str):
    return tuple(tuple(int(x) for x in span.split(".."))
                 for span in key.split(";"))


def _current_entry(layout):
    c = compile_chunk_circuit(layout)
    return {
        "constraints": c.cs.num_constraints,
        "wires": c.cs.num_wires,
        "public_wires": c.cs.num_public,
        "digest": c.cs.digest().hex(),
    }


def test_circuit_goldens():
    doc = json.loads(MANIFEST.read_text())
    assert doc["format"] == "zkredact-circuit-manifest-v1"
    assert doc["field_prime"] == "0xffffffff00000001"

    current = {key: _current_entry(_layout_from_key(key))
               for key in doc["circuits"]}

    if os.environ.get("ZKREDACT_UPDATE_GOLDENS") == "1":
        doc["circuits"] = current
        MANIFEST.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return

    for key, entry in doc["circuits"].items():
        assert current[key] == entry, f"circuit {key} drifted from its golden"


def test_goldens_cover_the_acceptance_layouts():
    keys = set(json.loads(MANIFEST.read_text())["circuits"])
    assert {"50..64", "0..55", "0..64", "10..20;30..34"} <= keys

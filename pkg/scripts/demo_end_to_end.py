#!/usr/bin/env python3
"""Seed a throwaway registry, compile a fully detailed passport for the
bundled example deployment, and export it (canonical JSON, detached
signature, printable report) into ./demo_out/.

Run from the repository root:
    python3 scripts/demo_end_to_end.py
"""

from __future__ import annotations

import sys
import tempfile
from importlib import resources
from pathlib import Path

from passport_registry import passport as pp
from passport_registry.passport import DetailConfig, PassportSigner
from passport_registry.seeding import seed_fixture
from passport_registry.store import RegistryStore


def main() -> int:
    fixture = str(resources.files("passport_registry")
                  .joinpath("fixtures/maggic.json"))
    out = Path("demo_out")
    out.mkdir(exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        store = RegistryStore(str(Path(tmp) / "registry.db"))
        try:
            count = seed_fixture(store, fixture)
            print(f"seeded {count} entities")

            ent = pp.create_passport(store, "deployment_maggic",
                                     DetailConfig.full(), actor="demo")
            doc = ent.body["document"]
            print(f"compiled passport {ent.id} with "
                  f"{len(doc['sections'])} sections covering "
                  f"{len(doc['sourceVersions'])} source entities")

            signer = PassportSigner.load_or_create(str(out / "demo_key.pem"))
            payload = pp.canonical_bytes(doc)
            envelope = signer.sign_document(doc)
            (out / "demo.passport.json").write_bytes(payload)
            (out / "demo.passport.sig").write_text(
                str(envelope.to_dict()))
            (out / "demo.report.md").write_text(pp.render_report(doc))
            print(f"digest {envelope.digest}")
            print(f"wrote exports to {out}/")
        finally:
            store.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())

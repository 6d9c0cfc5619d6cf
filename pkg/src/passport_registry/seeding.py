"""Fixture loading: a JSON file with ordered entity rows (and optionally the
accounts the server should accept). Fixture rows may pin explicit ids so that
scripted clients can refer to well-known entities."""

from __future__ import annotations

import json
from pathlib import Path

from . import domain
from .store import RegistryStore


def derive_study_id(store: RegistryStore, kind: str, data: dict) -> str:
    if kind in ("Organization", "Personnel", "Study"):
        return ""
    ent, _report = domain.parse_entity(kind, data)
    for target in domain.reference_targets(ent):
        if not target.id:
            continue
        resolved = store.get(target.id)
        if resolved.kind == "Study":
            return resolved.id
        if resolved.studyId:
            return resolved.studyId
    return data.get("studyId", "")


def seed_fixture(store: RegistryStore, fixture_path: str) -> int:
    """Load every entity row of a fixture, in file order. Returns the count."""
    fixture = json.loads(Path(fixture_path).read_text())
    count = 0
    with store.transaction():
        for row in fixture.get("entities", []):
            kind = row["kind"]
            data = row["data"]
            study_id = row.get("studyId") or derive_study_id(store, kind, data)
            store.create(kind, data, actor=row.get("actor", "seed"),
                         study_id=study_id, entity_id=row.get("id"))
            count += 1
    return count

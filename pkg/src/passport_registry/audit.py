"""Append-only audit records and pure event replay.

Entries are written by the registry store inside the same transaction as the
mutation they describe; nothing in the system mutates or deletes them. Each
entry carries the full entity body after the action, which keeps replay a
simple fold and keeps exported logbooks self-contained.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field


class InconsistentStream(Exception):
    """Replay hit an entry that cannot follow from the entries before it."""


@dataclass(frozen=True)
class AuditEntry:
    id: str
    sequence: int
    actorUsername: str
    action: str  # CREATE | UPDATE | DELETE
    entityKind: str
    entityId: str
    timestamp: str
    snapshot: dict | None  # None for DELETE
    previousVersion: int

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "sequence": self.sequence,
            "actorUsername": self.actorUsername,
            "action": self.action,
            "entityKind": self.entityKind,
            "entityId": self.entityId,
            "timestamp": self.timestamp,
            "snapshot": self.snapshot,
            "previousVersion": self.previousVersion,
        }


@dataclass
class AuditLogBook:
    passportId: str
    entries: list[AuditEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "passportId": self.passportId,
            "entries": [e.to_dict() for e in self.entries],
        }


def entry_from_dict(data: dict) -> AuditEntry:
    return AuditEntry(
        id=data["id"],
        sequence=data["sequence"],
        actorUsername=data["actorUsername"],
        action=data["action"],
        entityKind=data["entityKind"],
        entityId=data["entityId"],
        timestamp=data["timestamp"],
        snapshot=data.get("snapshot"),
        previousVersion=data.get("previousVersion", 0),
    )


def replay(entries: list[AuditEntry]) -> dict[str, dict]:
    """Fold a sequence-ordered audit stream into entityId -> latest body.

    Pure: the input entries are not modified. Raises InconsistentStream for
    an UPDATE or DELETE of an id never created, a CREATE of a live id, or
    out-of-order sequences.
    """
    state: dict[str, dict] = {}
    last_seq = 0
    for entry in entries:
        if entry.sequence <= last_seq:
            raise InconsistentStream(
                f"sequence {entry.sequence} after {last_seq} is not increasing")
        last_seq = entry.sequence
        if entry.action == "CREATE":
            if entry.entityId in state:
                raise InconsistentStream(f"CREATE of live id {entry.entityId}")
            if entry.snapshot is None:
                raise InconsistentStream(f"CREATE without snapshot ({entry.entityId})")
            state[entry.entityId] = copy.deepcopy(entry.snapshot)
        elif entry.action == "UPDATE":
            if entry.entityId not in state:
                raise InconsistentStream(f"UPDATE before CREATE ({entry.entityId})")
            if entry.snapshot is None:
                raise InconsistentStream(f"UPDATE without snapshot ({entry.entityId})")
            state[entry.entityId] = copy.deepcopy(entry.snapshot)
        elif entry.action == "DELETE":
            if entry.entityId not in state:
                raise InconsistentStream(f"DELETE of absent id {entry.entityId}")
            del state[entry.entityId]
        else:
            raise InconsistentStream(f"unknown action {entry.action!r}")
    return state

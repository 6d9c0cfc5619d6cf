"""SQLite-backed registry for lifecycle entities.

Responsibilities: referential integrity across entity kinds, optimistic
concurrency via per-entity versions, study scoping, paged/searchable
listings, provenance-chain resolution, and writing exactly one audit entry
per successful mutation (in the same transaction as the mutation itself).
"""

from __future__ import annotations

import contextlib
import json
import re
import secrets
import sqlite3
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from typing import Any, Callable, Iterator

from . import domain
from .audit import AuditEntry
from .domain import ValidationReport

SCHEMA_VERSION = 1

GLOBAL_KINDS = frozenset({"Organization", "Personnel"})

# parent pointer walked by provenance resolution, deployment downwards
CHAIN_PARENT: list[tuple[str, str | None]] = [
    ("ModelDeployment", "modelId"),
    ("Model", "learningProcessId"),
    ("LearningProcess", "learningDatasetId"),
    ("LearningDataset", "datasetId"),
    ("Dataset", "featuresetId"),
    ("FeatureSet", "experimentId"),
    ("Experiment", "studyId"),
    ("Study", None),
]

SEARCH_KEYS = ("name", "title", "description")


class RegistryError(Exception):
    code = "registry_error"

    def __init__(self, message: str, details: Any = None):
        super().__init__(message)
        self.details = details


class NotFound(RegistryError):
    code = "not_found"


class ValidationFailed(RegistryError):
    code = "validation_failed"

    def __init__(self, report: ValidationReport, message: str = "validation failed"):
        super().__init__(message, details=report.to_dict())
        self.report = report


class BrokenReference(RegistryError):
    code = "broken_reference"

    def __init__(self, fld: str, target_kind: str, target_id: str):
        super().__init__(
            f"{fld} does not resolve to an existing {target_kind} ({target_id!r})",
            details={"field": fld, "kind": target_kind, "id": target_id},
        )
        self.field = fld


class CrossStudyReference(RegistryError):
    code = "cross_study_reference"


class DuplicateKey(RegistryError):
    code = "duplicate_key"


class VersionConflict(RegistryError):
    code = "version_conflict"


class ReferencedBy(RegistryError):
    code = "referenced_by"

    def __init__(self, referrers: list[dict]):
        super().__init__(
            "entity is referenced by other entities and cannot be deleted",
            details={"referrers": referrers},
        )
        self.referrers = referrers


class BrokenChain(RegistryError):
    code = "broken_chain"

    def __init__(self, fld: str):
        super().__init__(f"provenance chain broken at {fld}", details={"field": fld})
        self.field = fld


def _table(kind: str) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "_", kind).lower()


TABLES = {kind: _table(kind) for kind in domain.ENTITY_TYPES}


@dataclass
class StoredEntity:
    id: str
    kind: str
    studyId: str
    version: int
    stamp: domain.Stamp
    body: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "studyId": self.studyId,
            "version": self.version,
            "createdAt": self.stamp.createdAt,
            "createdBy": self.stamp.createdBy,
            "lastUpdatedAt": self.stamp.lastUpdatedAt,
            "lastUpdatedBy": self.stamp.lastUpdatedBy,
            "data": self.body,
        }


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


def new_id() -> str:
    # time-sortable: nanosecond timestamp prefix + random suffix
    return f"{time.time_ns():016x}{secrets.token_hex(5)}"


class RegistryStore:
    """Concurrent-safe store; one writer at a time via a process-wide lock."""

    def __init__(self, path: str, clock: Callable[[], str] | None = None):
        self._lock = threading.RLock()
        self._clock = clock or utc_now
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._conn.isolation_level = None
        self._txn_depth = 0
        self._conn.execute("PRAGMA journal_mode=WAL")
        ddl = resources.files("passport_registry").joinpath("schema.sql").read_text()
        # executescript manages its own transaction; keep it outside _txn
        self._conn.executescript(ddl)
        row = self._conn.execute("SELECT version FROM schema_version").fetchone()
        if row is None:
            self._conn.execute(
                "INSERT INTO schema_version (version) VALUES (?)", (SCHEMA_VERSION,))

    def close(self) -> None:
        self._conn.close()

    @contextlib.contextmanager
    def _txn(self) -> Iterator[None]:
        with self._lock:
            if self._txn_depth == 0:
                self._conn.execute("BEGIN IMMEDIATE")
            self._txn_depth += 1
            try:
                yield
            except BaseException:
                self._txn_depth -= 1
                if self._txn_depth == 0:
                    self._conn.execute("ROLLBACK")
                raise
            else:
                self._txn_depth -= 1
                if self._txn_depth == 0:
                    self._conn.execute("COMMIT")

    @contextlib.contextmanager
    def transaction(self) -> Iterator[None]:
        """Group several mutations into one atomic commit."""
        with self._txn():
            yield

    # -- internal helpers ---------------------------------------------------

    def _row_to_entity(self, kind: str, row: sqlite3.Row) -> StoredEntity:
        return StoredEntity(
            id=row["id"],
            kind=kind,
            studyId=row["study_id"],
            version=row["version"],
            stamp=domain.Stamp(
                createdAt=row["created_at"],
                createdBy=row["created_by"],
                lastUpdatedAt=row["updated_at"],
                lastUpdatedBy=row["updated_by"],
            ),
            body=json.loads(row["body"]),
        )

    def _fetch(self, kind: str, entity_id: str) -> StoredEntity | None:
        row = self._conn.execute(
            f"SELECT * FROM {TABLES[kind]} WHERE id = ?", (entity_id,)).fetchone()
        return self._row_to_entity(kind, row) if row else None

    def _locate(self, entity_id: str) -> StoredEntity | None:
        for kind in domain.ENTITY_TYPES:
            ent = self._fetch(kind, entity_id)
            if ent is not None:
                return ent
        return None

    def _check_references(self, ent: Any, study_id: str) -> None:
        for target in domain.reference_targets(ent):
            found = self._fetch(target.kind, target.id)
            if found is None:
                raise BrokenReference(target.field, target.kind, target.id)
            if (found.kind not in GLOBAL_KINDS and study_id
                    and found.studyId and found.studyId != study_id):
                raise CrossStudyReference(
                    f"{target.field} points into study {found.studyId!r}, "
                    f"not {study_id!r}")

    def _check_duplicates(self, kind: str, body: dict, study_id: str,
                          entity_id: str | None) -> None:
        if kind == "Model":
            for row in self._conn.execute(
                    "SELECT id, body FROM model WHERE study_id = ?", (study_id,)):
                if row["id"] == entity_id:
                    continue
                other = json.loads(row["body"])
                if (other.get("name"), other.get("version")) == (
                        body.get("name"), body.get("version")):
                    raise DuplicateKey(
                        f"model {body.get('name')!r} version {body.get('version')!r} "
                        f"already exists in this study")
        elif kind == "Feature":
            for row in self._conn.execute(
                    "SELECT id, body FROM feature"):
                if row["id"] == entity_id:
                    continue
                other = json.loads(row["body"])
                if (other.get("featuresetId") == body.get("featuresetId")
                        and other.get("title") == body.get("title")):
                    raise DuplicateKey(
                        f"feature {body.get('title')!r} already exists in this feature set")

    def _write_edges(self, kind: str, entity_id: str, ent: Any) -> None:
        self._conn.execute(
            "DELETE FROM ref_edge WHERE src_kind = ? AND src_id = ?", (kind, entity_id))
        for target in domain.reference_targets(ent):
            self._conn.execute(
                "INSERT INTO ref_edge (src_kind, src_id, field, dst_kind, dst_id) "
                "VALUES (?, ?, ?, ?, ?)",
                (kind, entity_id, target.field, target.kind, target.id))

    def _append_audit(self, actor: str, action: str, kind: str, entity_id: str,
                      snapshot: dict | None, previous_version: int) -> None:
        self._conn.execute(
            "INSERT INTO audit_log (id, actor, action, entity_kind, entity_id, "
            "timestamp, snapshot, previous_version) VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
            (new_id(), actor, action, kind, entity_id, self._clock(),
             None if snapshot is None else json.dumps(snapshot), previous_version))

    # -- mutations ----------------------------------------------------------

    def create(self, kind: str, data: dict, actor: str, study_id: str = "",
               entity_id: str | None = None) -> StoredEntity:
        if kind not in domain.ENTITY_TYPES:
            raise domain.UnknownKind(kind)
        ent, report = domain.parse_entity(kind, data)
        if not report.valid:
            raise ValidationFailed(report)
        with self._txn():
            eid = entity_id or new_id()
            if self._locate(eid) is not None:
                raise DuplicateKey(f"id {eid!r} already exists")
            if kind in GLOBAL_KINDS:
                study_id = ""
            elif kind == "Study":
                study_id = eid
            self._check_references(ent, study_id)
            self._check_duplicates(kind, data, study_id, None)
            now = self._clock()
            body = domain.entity_to_dict(ent)
            self._conn.execute(
                f"INSERT INTO {TABLES[kind]} (id, study_id, version, created_at, "
                "created_by, updated_at, updated_by, body) VALUES (?, ?, 1, ?, ?, ?, ?, ?)",
                (eid, study_id, now, actor, now, actor, json.dumps(body)))
            self._write_edges(kind, eid, ent)
            self._append_audit(actor, "CREATE", kind, eid, body, 0)
            return self._fetch(kind, eid)  # type: ignore[return-value]

    def update(self, entity_id: str, data: dict, expected_version: int,
               actor: str) -> StoredEntity:
        with self._txn():
            current = self._locate(entity_id)
            if current is None:
                raise NotFound(f"no entity with id {entity_id!r}")
            if current.version != expected_version:
                raise VersionConflict(
                    f"expected version {expected_version}, stored version is "
                    f"{current.version}")
            kind = current.kind
            ent, report = domain.parse_entity(kind, data)
            if not report.valid:
                raise ValidationFailed(report)
            self._check_references(ent, current.studyId)
            self._check_duplicates(kind, data, current.studyId, entity_id)
            body = domain.entity_to_dict(ent)
            self._conn.execute(
                f"UPDATE {TABLES[kind]} SET version = version + 1, updated_at = ?, "
                "updated_by = ?, body = ? WHERE id = ?",
                (self._clock(), actor, json.dumps(body), entity_id))
            self._write_edges(kind, entity_id, ent)
            self._append_audit(actor, "UPDATE", kind, entity_id, body, expected_version)
            return self._fetch(kind, entity_id)  # type: ignore[return-value]

    def delete(self, entity_id: str, actor: str) -> None:
        with self._txn():
            current = self._locate(entity_id)
            if current is None:
                raise NotFound(f"no entity with id {entity_id!r}")
            referrers = [
                {"kind": row["src_kind"], "id": row["src_id"], "field": row["field"]}
                for row in self._conn.execute(
                    "SELECT src_kind, src_id, field FROM ref_edge WHERE dst_id = ?",
                    (entity_id,))
            ]
            if referrers:
                raise ReferencedBy(referrers)
            self._conn.execute(
                f"DELETE FROM {TABLES[current.kind]} WHERE id = ?", (entity_id,))
            self._conn.execute(
                "DELETE FROM ref_edge WHERE src_id = ?", (entity_id,))
            self._append_audit(actor, "DELETE", current.kind, entity_id, None,
                               current.version)

    # -- reads --------------------------------------------------------------

    def get(self, entity_id: str) -> StoredEntity:
        with self._lock:
            ent = self._locate(entity_id)
        if ent is None:
            raise NotFound(f"no entity with id {entity_id!r}")
        return ent

    def list(self, kind: str, study_id: str | None = None, page: int = 1,
             page_size: int = 20, search: str = "") -> tuple[list[StoredEntity], int]:
        if kind not in domain.ENTITY_TYPES:
            raise domain.UnknownKind(kind)
        if page_size < 1:
            raise ValidationFailed(ValidationReport(
                errors=[domain.Issue("pageSize", "must be >= 1")]))
        if page < 1:
            raise ValidationFailed(ValidationReport(
                errors=[domain.Issue("page", "must be >= 1")]))
        query = f"SELECT * FROM {TABLES[kind]}"
        params: list = []
        if study_id is not None:
            query += " WHERE study_id = ?"
            params.append(study_id)
        query += " ORDER BY created_at, id"
        with self._lock:
            rows = self._conn.execute(query, params).fetchall()
        items = [self._row_to_entity(kind, r) for r in rows]
        if search:
            needle = search.lower()
            items = [e for e in items
                     if any(needle in str(e.body.get(k, "")).lower()
                            for k in SEARCH_KEYS)]
        total = len(items)
        start = (page - 1) * page_size
        return items[start:start + page_size], total

    def resolve_provenance_chain(self, start_id: str) -> list[StoredEntity]:
        """Walk Study -> ... -> ModelDeployment; the deployment link is
        omitted when resolution starts from a Model id."""
        with self._lock:
            start = self._locate(start_id)
            if start is None:
                raise NotFound(f"no entity with id {start_id!r}")
            kinds = [k for k, _ in CHAIN_PARENT]
            if start.kind not in kinds:
                raise ValidationFailed(ValidationReport(errors=[domain.Issue(
                    "id", f"cannot resolve a provenance chain from a {start.kind}")]))
            chain = [start]
            idx = kinds.index(start.kind)
            current = start
            for kind, parent_field in CHAIN_PARENT[idx:]:
                if parent_field is None:
                    break
                parent_id = current.body.get(parent_field, "")
                parent_kind = CHAIN_PARENT[kinds.index(kind) + 1][0]
                parent = self._fetch(parent_kind, parent_id) if parent_id else None
                if parent is None:
                    raise BrokenChain(parent_field)
                chain.append(parent)
                current = parent
        chain.reverse()
        return chain

    # -- audit access -------------------------------------------------------

    def audit_entries(self, entity_ids: set[str] | None = None) -> list[AuditEntry]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM audit_log ORDER BY sequence").fetchall()
        entries = []
        for row in rows:
            if entity_ids is not None and row["entity_id"] not in entity_ids:
                continue
            entries.append(AuditEntry(
                id=row["id"],
                sequence=row["sequence"],
                actorUsername=row["actor"],
                action=row["action"],
                entityKind=row["entity_kind"],
                entityId=row["entity_id"],
                timestamp=row["timestamp"],
                snapshot=json.loads(row["snapshot"]) if row["snapshot"] else None,
                previousVersion=row["previous_version"],
            ))
        return entries

    # -- role assignments ---------------------------------------------------

    def add_role_assignment(self, personnel_id: str, role: str, study_id: str,
                            assigned_by: str) -> dict:
        with self._txn():
            exists = self._conn.execute(
                "SELECT 1 FROM role_assignment WHERE personnel_id = ? AND role = ? "
                "AND study_id = ?", (personnel_id, role, study_id)).fetchone()
            if exists:
                raise DuplicateKey(
                    f"{personnel_id!r} already holds {role} in study {study_id!r}")
            self._conn.execute(
                "INSERT INTO role_assignment (personnel_id, role, study_id, "
                "assigned_by, assigned_at) VALUES (?, ?, ?, ?, ?)",
                (personnel_id, role, study_id, assigned_by, self._clock()))
            assignment = {"personnelId": personnel_id, "role": role,
                          "studyId": study_id}
            self._append_audit(assigned_by, "CREATE", "RoleAssignment",
                               new_id(), assignment, 0)
        return assignment

    def role_assignments(self, personnel_id: str) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT role, study_id FROM role_assignment WHERE personnel_id = ?",
                (personnel_id,)).fetchall()
        return [{"role": r["role"], "studyId": r["study_id"]} for r in rows]

    # -- integrity sweep (used by tests) ------------------------------------

    def all_entities(self) -> list[StoredEntity]:
        out = []
        with self._lock:
            for kind in domain.ENTITY_TYPES:
                rows = self._conn.execute(f"SELECT * FROM {TABLES[kind]}").fetchall()
                out.extend(self._row_to_entity(kind, r) for r in rows)
        return out

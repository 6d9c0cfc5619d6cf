"""Passport compilation: aggregate one deployment's provenance graph into a
section-structured document, filter by a detail selection, produce canonical
bytes, sign/verify exports, and render a human-readable report.
"""

from __future__ import annotations

import base64
import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ed25519

from .store import RegistryStore, StoredEntity, new_id, utc_now
from .domain import ValidationReport, Issue
from .store import ValidationFailed


class SectionKind(str, enum.Enum):
    MODEL_DETAILS = "model_details"
    DEPLOYMENT_DETAILS = "deployment_details"
    ENVIRONMENT_DETAILS = "environment_details"
    FEATURE_SETS = "feature_sets"
    DATASETS = "datasets"
    LEARNING_PROCESS = "learning_process"
    POPULATION_DETAILS = "population_details"
    EXPERIMENT_DETAILS = "experiment_details"
    STUDY_DETAILS = "study_details"
    EVALUATION_MEASURES = "evaluation_measures"
    MODEL_FIGURES = "model_figures"
    SURVEYS = "surveys"
    PARAMETERS = "parameters"
    AUDIT = "audit"


SECTION_ORDER = [s.value for s in SectionKind]

SECTION_TITLES = {
    "model_details": "Model Details",
    "deployment_details": "Model Deployment Details",
    "environment_details": "Environment Details",
    "feature_sets": "Feature Sets",
    "datasets": "Datasets",
    "learning_process": "Learning Processes",
    "population_details": "Population Details",
    "experiment_details": "Experiment Details",
    "study_details": "Study Details",
    "evaluation_measures": "Evaluation Measures",
    "model_figures": "Model Figures",
    "surveys": "Surveys",
    "parameters": "Parameters",
    "audit": "Audit Log Book",
}


class EmptyDetail(Exception):
    """A passport without at least its model identity is meaningless."""


@dataclass(frozen=True)
class DetailConfig:
    selected: frozenset = field(default_factory=frozenset)

    @staticmethod
    def of(sections) -> "DetailConfig":
        """Normalize a selection; model_details cannot be deselected."""
        values = set()
        for s in sections:
            value = s.value if isinstance(s, SectionKind) else str(s)
            if value not in SECTION_ORDER:
                raise ValidationFailed(ValidationReport(errors=[
                    Issue("sections", f"unknown section {value!r}")]))
            values.add(value)
        if not values:
            raise EmptyDetail("detail selection must not be empty")
        values.add(SectionKind.MODEL_DETAILS.value)
        return DetailConfig(frozenset(values))

    @staticmethod
    def full() -> "DetailConfig":
        return DetailConfig(frozenset(SECTION_ORDER))


def _by_ref(store: RegistryStore, kind: str, ref_field: str, ref_id: str,
            study_id: str) -> list[StoredEntity]:
    items, _ = store.list(kind, study_id=study_id, page_size=10_000)
    return [e for e in items if e.body.get(ref_field) == ref_id]


def compile_document(store: RegistryStore, deployment_id: str, detail: DetailConfig,
                     actor: str, passport_id: str | None = None,
                     clock: Callable[[], str] = utc_now) -> dict:
    """Build the full section map for one deployment's provenance graph.

    All reads happen inside one store transaction, so concurrent mutations
    cannot tear the document.
    """
    sources: dict[str, int] = {}

    def take(ent: StoredEntity) -> StoredEntity:
        sources[ent.id] = ent.version
        return ent

    with store.transaction():
        chain = store.resolve_provenance_chain(deployment_id)
        by_kind = {e.kind: e for e in chain}
        study = take(by_kind["Study"])
        experiment = take(by_kind["Experiment"])
        feature_set = take(by_kind["FeatureSet"])
        dataset = take(by_kind["Dataset"])
        learning_dataset = take(by_kind["LearningDataset"])
        process = take(by_kind["LearningProcess"])
        model = take(by_kind["Model"])
        deployment = take(by_kind["ModelDeployment"])
        sid = study.id

        environment = take(store.get(deployment.body["environmentId"]))
        transformation = take(store.get(learning_dataset.body["transformationId"]))
        implementation = take(store.get(process.body["implementationId"]))
        algorithm = take(store.get(implementation.body["algorithmId"]))

        features = [take(e) for e in _by_ref(
            store, "Feature", "featuresetId", feature_set.id, sid)]
        stages = [take(e) for e in _by_ref(
            store, "LearningStage", "learningProcessId", process.id, sid)]
        measures = [take(e) for e in _by_ref(
            store, "EvaluationMeasure", "modelId", model.id, sid)]
        figures = [take(e) for e in _by_ref(
            store, "ModelFigure", "modelId", model.id, sid)]
        surveys = [take(e) for e in _by_ref(
            store, "Survey", "studyId", sid, sid)]
        populations = [take(e) for e in _by_ref(
            store, "Population", "studyId", sid, sid)]
        target_ids = {algorithm.id, process.id, model.id} | {s.id for s in stages}
        parameters = [take(e) for e in store.list(
            "Parameter", study_id=sid, page_size=10_000)[0]
            if e.body.get("targetId") in target_ids]

        audit_entries = store.audit_entries(set(sources))

    sections: dict[str, dict] = {}
    m = model.body
    sections["model_details"] = {
        "modelName": m["name"],
        "modelVersion": m["version"],
        "modelType": m["modelType"],
        "productIdentifier": m["productIdentifier"],
        "owner": m["owner"],
        "trlLevel": m["trlLevel"],
        "license": m["license"],
        "primaryUse": m["primaryUse"],
        "secondaryUse": m["secondaryUse"],
        "intendedUsers": m["intendedUsers"],
        "counterIndications": m["counterIndications"],
        "ethicalConsiderations": m["ethicalConsiderations"],
        "limitations": m["limitations"],
        "fairnessConstraints": m["fairnessConstraints"],
    }
    sections["deployment_details"] = {
        "deploymentTags": list(deployment.body["tags"]),
        "deploymentStatus": deployment.body["status"],
        "identifiedFailures": deployment.body["identifiedFailures"],
    }
    sections["environment_details"] = {
        "environmentTitle": environment.body["title"],
        "environmentDescription": environment.body["description"],
        "hardwareProperties": environment.body["hardwareProperties"],
        "softwareProperties": environment.body["softwareProperties"],
        "connectivityDetails": environment.body["connectivityDetails"],
    }
    sections["feature_sets"] = {
        "featureSets": [{
            "title": feature_set.body["title"],
            "description": feature_set.body["description"],
            "url": feature_set.body["url"],
            "createdAt": feature_set.stamp.createdAt,
            "createdBy": feature_set.stamp.createdBy,
            "lastUpdatedAt": feature_set.stamp.lastUpdatedAt,
            "lastUpdatedBy": feature_set.stamp.lastUpdatedBy,
        }],
        "features": [{
            "title": f.body["title"],
            "description": f.body["description"],
            "dataType": f.body["dataType"],
            "isOutcome": f.body["isOutcome"],
            "mandatory": f.body["mandatory"],
            "isUnique": f.body["isUnique"],
            "units": f.body["units"],
            "equipment": f.body["equipment"],
            "dataCollection": f.body["dataCollection"],
        } for f in features],
    }
    sections["datasets"] = {
        "datasets": [{
            "title": dataset.body["title"],
            "description": dataset.body["description"],
            "version": dataset.body["version"],
            "referenceEntity": dataset.body["referenceEntity"],
            "numOfRecords": dataset.body["numOfRecords"],
            "synthetic": dataset.body["synthetic"],
        }],
        "learningDatasets": [{"description": learning_dataset.body["description"]}],
        "transformations": [{
            "title": transformation.body["title"],
            "description": transformation.body["description"],
            "steps": list(transformation.body["steps"]),
        }],
    }
    sections["learning_process"] = {
        "description": process.body["description"],
        "algorithm": {"name": algorithm.body["name"], "type": algorithm.body["type"]},
        "implementation": {
            "software": implementation.body["software"],
            "version": implementation.body["version"],
        },
        "stages": [{
            "stageType": s.body["stageType"],
            "description": s.body["description"],
            "datasetPercentage": s.body["datasetPercentage"],
        } for s in stages],
    }
    sections["population_details"] = {
        "populations": [{
            "url": p.body["url"],
            "description": p.body["description"],
            "characteristics": p.body["characteristics"],
        } for p in populations],
    }
    sections["experiment_details"] = {
        "researchQuestion": experiment.body["researchQuestion"],
    }
    sections["study_details"] = {
        "studyName": study.body["name"],
        "studyDescription": study.body["description"],
        "studyEthics": study.body["ethics"],
        "studyObjectives": study.body["objectives"],
    }
    sections["evaluation_measures"] = {
        "measures": [{
            "name": e.body["name"],
            "dataType": e.body["dataType"],
            "value": e.body["value"],
            "description": e.body["description"],
        } for e in measures],
    }
    sections["model_figures"] = {
        "figures": [{
            "caption": f.body["caption"],
            "mediaType": f.body["mediaType"],
            "payloadBase64": f.body["payloadBase64"],
        } for f in figures],
    }
    sections["surveys"] = {
        "surveys": [{
            "question": s.body["question"],
            "answer": s.body["answer"],
            "category": s.body["category"],
        } for s in surveys],
    }
    sections["parameters"] = {
        "parameters": [{
            "name": p.body["name"],
            "dataType": p.body["dataType"],
            "value": p.body["value"],
            "targetKind": p.body["targetKind"],
        } for p in parameters],
    }
    sections["audit"] = {"entries": [e.to_dict() for e in audit_entries]}

    doc = {
        "passportId": passport_id or new_id(),
        "compiledAt": clock(),
        "compiledBy": actor,
        "deploymentId": deployment_id,
        "sections": [{"kind": k, "content": sections[k]}
                     for k in SECTION_ORDER if k in detail.selected],
        "sourceVersions": sources,
    }
    return doc


def apply_detail(full_doc: dict, detail: DetailConfig) -> dict:
    """Restrict a full document's sections to the selection; order and all
    other fields are preserved."""
    out = dict(full_doc)
    out["sections"] = [s for s in full_doc["sections"]
                       if s["kind"] in detail.selected]
    return out


def create_passport(store: RegistryStore, deployment_id: str, detail: DetailConfig,
                    actor: str, clock: Callable[[], str] = utc_now) -> StoredEntity:
    """Compile and persist the passport as a versioned entity."""
    with store.transaction():
        pid = new_id()
        doc = compile_document(store, deployment_id, detail, actor,
                               passport_id=pid, clock=clock)
        return store.create(
            "Passport", {"deploymentId": deployment_id, "document": doc},
            actor=actor,
            study_id=store.get(deployment_id).studyId,
            entity_id=pid)


def recompile_passport(store: RegistryStore, passport_id: str,
                       detail: DetailConfig, actor: str,
                       clock: Callable[[], str] = utc_now) -> StoredEntity:
    """Recompile an existing passport (new entity version, same id)."""
    with store.transaction():
        current = store.get(passport_id)
        doc = compile_document(store, current.body["deploymentId"], detail, actor,
                               passport_id=passport_id, clock=clock)
        return store.update(
            passport_id,
            {"deploymentId": current.body["deploymentId"], "document": doc},
            expected_version=current.version, actor=actor)


# ---------------------------------------------------------------------------
# Canonical form & signing
# ---------------------------------------------------------------------------


def canonical_bytes(doc: dict) -> bytes:
    """Deterministic byte form: UTF-8, lexicographically sorted keys, no
    insignificant whitespace, minimal number representation."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False, allow_nan=False).encode("utf-8")


class MalformedKey(Exception):
    pass


@dataclass(frozen=True)
class SignatureEnvelope:
    digest: str  # hex SHA-256 of the canonical bytes
    signature: str  # base64
    keyId: str
    algorithmLabel: str = "Ed25519"

    def to_dict(self) -> dict:
        return {
            "digest": self.digest,
            "signature": self.signature,
            "keyId": self.keyId,
            "algorithmLabel": self.algorithmLabel,
        }

    @staticmethod
    def from_dict(data: dict) -> "SignatureEnvelope":
        return SignatureEnvelope(
            digest=data["digest"], signature=data["signature"],
            keyId=data["keyId"], algorithmLabel=data.get("algorithmLabel", "Ed25519"))


def key_id_of(public_key: ed25519.Ed25519PublicKey) -> str:
    raw = public_key.public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw)
    return hashlib.sha256(raw).hexdigest()[:16]


def sign(payload: bytes, private_key: ed25519.Ed25519PrivateKey) -> SignatureEnvelope:
    if not isinstance(private_key, ed25519.Ed25519PrivateKey):
        raise MalformedKey("expected an Ed25519 private key")
    return SignatureEnvelope(
        digest=hashlib.sha256(payload).hexdigest(),
        signature=base64.b64encode(private_key.sign(payload)).decode(),
        keyId=key_id_of(private_key.public_key()),
    )


def verify(payload: bytes, envelope: SignatureEnvelope,
           public_key: ed25519.Ed25519PublicKey) -> bool:
    if not isinstance(public_key, ed25519.Ed25519PublicKey):
        raise MalformedKey("expected an Ed25519 public key")
    if hashlib.sha256(payload).hexdigest() != envelope.digest:
        return False
    try:
        public_key.verify(base64.b64decode(envelope.signature), payload)
        return True
    except (InvalidSignature, ValueError):
        return False


class PassportSigner:
    """Pluggable local signer; a remote signing service could replace this
    behind the same sign/verify surface."""

    def __init__(self, private_key: ed25519.Ed25519PrivateKey):
        self.private_key = private_key
        self.public_key = private_key.public_key()

    @staticmethod
    def generate() -> "PassportSigner":
        return PassportSigner(ed25519.Ed25519PrivateKey.generate())

    @staticmethod
    def load_or_create(key_path: str) -> "PassportSigner":
        path = Path(key_path)
        if path.exists():
            key = serialization.load_pem_private_key(path.read_bytes(), password=None)
            if not isinstance(key, ed25519.Ed25519PrivateKey):
                raise MalformedKey(f"{key_path} is not an Ed25519 private key")
            return PassportSigner(key)
        signer = PassportSigner.generate()
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(signer.private_key.private_bytes(
            serialization.Encoding.PEM, serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption()))
        return signer

    def public_pem(self) -> bytes:
        return self.public_key.public_bytes(
            serialization.Encoding.PEM, serialization.PublicFormat.SubjectPublicKeyInfo)

    def sign_document(self, doc: dict) -> SignatureEnvelope:
        return sign(canonical_bytes(doc), self.private_key)

    def verify_document(self, doc: dict, envelope: SignatureEnvelope) -> bool:
        return verify(canonical_bytes(doc), envelope, self.public_key)


# ---------------------------------------------------------------------------
# Human-readable report
# ---------------------------------------------------------------------------


def _cell(value) -> str:
    if value is None or value == "":
        return "N/A"
    if isinstance(value, bool):
        return "Yes" if value else "No"
    if isinstance(value, list):
        return ", ".join(str(v) for v in value) if value else "N/A"
    return str(value)


def _kv_table(rows: list[tuple[str, object]]) -> list[str]:
    out = ["| | |", "|---|---|"]
    out.extend(f"| {label} | {_cell(value)} |" for label, value in rows)
    return out


def _col_table(headers: list[str], rows: list[list]) -> list[str]:
    out = ["| " + " | ".join(headers) + " |",
           "|" + "---|" * len(headers)]
    out.extend("| " + " | ".join(_cell(v) for v in row) + " |" for row in rows)
    return out


def render_report(doc: dict) -> str:
    """Markdown report with one heading per selected section, in section
    order; printable to PDF with standard tooling."""
    model_name = ""
    for section in doc["sections"]:
        if section["kind"] == "model_details":
            model_name = section["content"]["modelName"]
    lines = [f"# AI Product Passport: {model_name}" if model_name
             else "# AI Product Passport", ""]
    lines.append(f"Passport ID: {doc['passportId']}  ")
    lines.append(f"Compiled at {doc['compiledAt']} by {doc['compiledBy']}")
    lines.append("")

    for section in doc["sections"]:
        kind, content = section["kind"], section["content"]
        lines.append(f"## {SECTION_TITLES[kind]}")
        lines.append("")
        if kind == "model_details":
            lines += _kv_table([
                ("Model Name", content["modelName"]),
                ("Model Version", content["modelVersion"]),
                ("Model Type", content["modelType"]),
                ("Product Identifier", content["productIdentifier"]),
                ("Owner", content["owner"]),
                ("TRL Level", content["trlLevel"]),
                ("License", content["license"]),
                ("Primary Use", content["primaryUse"]),
                ("Secondary Use", content["secondaryUse"]),
                ("Intended Users", content["intendedUsers"]),
                ("Counter Indications", content["counterIndications"]),
                ("Ethical Considerations", content["ethicalConsiderations"]),
                ("Limitations", content["limitations"]),
                ("Fairness Constraints", content["fairnessConstraints"]),
            ])
        elif kind == "deployment_details":
            lines += _kv_table([
                ("Deployment Tags", content["deploymentTags"]),
                ("Deployment Status", content["deploymentStatus"]),
                ("Identified Failures", content["identifiedFailures"]),
            ])
        elif kind == "environment_details":
            lines += _kv_table([
                ("Environment Title", content["environmentTitle"]),
                ("Environment Description", content["environmentDescription"]),
                ("Hardware Properties", content["hardwareProperties"]),
                ("Software Properties", content["softwareProperties"]),
                ("Connectivity Details", content["connectivityDetails"]),
            ])
        elif kind == "feature_sets":
            lines += _col_table(
                ["FeatureSet Title", "Feature Set Description", "FeatureSet URL",
                 "Created At", "Created By", "Last Updated At", "Last Updated By"],
                [[fs["title"], fs["description"], fs["url"], fs["createdAt"],
                  fs["createdBy"], fs["lastUpdatedAt"], fs["lastUpdatedBy"]]
                 for fs in content["featureSets"]])
            lines.append("")
            lines += _col_table(
                ["Feature Title", "Feature Description", "Feature Data Type",
                 "Is an Outcome", "Feature Mandatory", "Feature Unique",
                 "Feature Units", "Feature Equipment", "Feature Data Collection"],
                [[f["title"], f["description"], f["dataType"], f["isOutcome"],
                  f["mandatory"], f["isUnique"], f["units"], f["equipment"],
                  f["dataCollection"]] for f in content["features"]])
        elif kind == "datasets":
            lines += _col_table(
                ["Dataset Title", "Dataset Description", "Dataset Version",
                 "Dataset Reference Entity", "Dataset Number of Records",
                 "Dataset Synthetic"],
                [[d["title"], d["description"], d["version"], d["referenceEntity"],
                  d["numOfRecords"], d["synthetic"]] for d in content["datasets"]])
            lines.append("")
            lines.append("### Learning Dataset Description")
            for ld in content["learningDatasets"]:
                lines.append("")
                lines.append(_cell(ld["description"]))
            lines.append("")
            lines.append("### Transformations")
            for t in content["transformations"]:
                lines.append("")
                lines.append(f"**{_cell(t['title'])}** — {_cell(t['description'])}")
                if t["steps"]:
                    lines.append("")
                    lines += _col_table(
                        ["Step", "Kind", "Parameters"],
                        [[s.get("name"), s.get("kind"), s.get("parameters")]
                         for s in t["steps"]])
        elif kind == "learning_process":
            lines.append("### Learning Process Description")
            lines.append("")
            lines.append(_cell(content["description"]))
            lines.append("")
            lines += _kv_table([
                ("Algorithm", content["algorithm"]["name"]),
                ("Algorithm Type", content["algorithm"]["type"]),
                ("Implementation Software", content["implementation"]["software"]),
                ("Implementation Version", content["implementation"]["version"]),
            ])
            lines.append("")
            lines += _col_table(
                ["Learning Stage Name", "Learning Stage Description",
                 "Dataset Percentage"],
                [[s["stageType"], s["description"], f"{s['datasetPercentage']}%"]
                 for s in content["stages"]])
        elif kind == "population_details":
            lines += _col_table(
                ["Population URL", "Population Description",
                 "Population Characteristics"],
                [[p["url"], p["description"], p["characteristics"]]
                 for p in content["populations"]])
        elif kind == "experiment_details":
            lines.append("### Research Question")
            lines.append("")
            lines.append(_cell(content["researchQuestion"]))
        elif kind == "study_details":
            lines += _kv_table([
                ("Study Name", content["studyName"]),
                ("Study Description", content["studyDescription"]),
                ("Study Ethics", content["studyEthics"]),
                ("Study Objectives", content["studyObjectives"]),
            ])
        elif kind == "evaluation_measures":
            lines += _col_table(
                ["Name", "Data Type", "Value", "Description"],
                [[m["name"], m["dataType"], m["value"], m["description"]]
                 for m in content["measures"]])
        elif kind == "model_figures":
            if not content["figures"]:
                lines.append("N/A")
            for f in content["figures"]:
                lines.append(f"- {_cell(f['caption'])} ({_cell(f['mediaType'])}, "
                             f"{len(f['payloadBase64'])} base64 bytes embedded)")
        elif kind == "surveys":
            lines += _col_table(
                ["Question", "Answer", "Category"],
                [[s["question"], s["answer"], s["category"]]
                 for s in content["surveys"]])
        elif kind == "parameters":
            lines += _col_table(
                ["Name", "Data Type", "Value", "Target"],
                [[p["name"], p["dataType"], p["value"], p["targetKind"]]
                 for p in content["parameters"]])
        elif kind == "audit":
            lines += _col_table(
                ["Seq", "Timestamp", "Actor", "Action", "Entity Kind", "Entity ID"],
                [[e["sequence"], e["timestamp"], e["actorUsername"], e["action"],
                  e["entityKind"], e["entityId"]] for e in content["entries"]])
        lines.append("")
    return "\n".join(lines)

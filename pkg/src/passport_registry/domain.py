"""Lifecycle entity types, invariant validation, phase classification.

Pure value types and pure functions only; persistence and transport live
elsewhere. Entity fields use lowerCamelCase so that the in-memory shape,
the API JSON and the passport export all share one naming convention.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, fields, is_dataclass, asdict
from typing import Any


class FeatureDataType(str, enum.Enum):
    STRING = "string"
    INTEGER = "integer"
    DECIMAL = "decimal"
    BOOLEAN = "boolean"
    DATETIME = "datetime"


class ParameterDataType(str, enum.Enum):
    STRING = "string"
    INTEGER = "integer"
    DECIMAL = "decimal"
    BOOLEAN = "boolean"


class MeasureDataType(str, enum.Enum):
    FLOAT = "float"
    INTEGER = "integer"
    STRING = "string"


class StageType(str, enum.Enum):
    TRAINING = "training"
    VALIDATION = "validation"
    TESTING = "testing"
    FEDERATED_AGGREGATION = "federated_aggregation"


class DeploymentStatus(str, enum.Enum):
    DRAFT = "DRAFT"
    VALIDATING = "VALIDATING"
    PRODUCTION = "PRODUCTION"
    RETIRED = "RETIRED"


class SurveyCategory(str, enum.Enum):
    ETHICS = "ethics"
    GOVERNANCE = "governance"
    BIAS = "bias"
    LIMITATION = "limitation"
    OTHER = "other"


class TransformationStepKind(str, enum.Enum):
    CLEANING = "cleaning"
    SCALING = "scaling"
    ENCODING = "encoding"
    IMPUTATION = "imputation"
    DIMENSIONALITY_REDUCTION = "dimensionality_reduction"
    NORMALIZATION = "normalization"
    OTHER = "other"


PARAMETER_TARGET_KINDS = {
    "algorithm": "Algorithm",
    "learning_process": "LearningProcess",
    "learning_stage": "LearningStage",
    "model": "Model",
}

TRL_PATTERN = re.compile(r"^TRL[1-9]$")


def ref(kind: str, optional: bool = False) -> Any:
    """Declare a field holding the id of another entity."""
    return field(default="", metadata={"ref": kind, "optional": optional})


@dataclass(frozen=True)
class Stamp:
    """Creation / last-update provenance carried by every stored entity."""

    createdAt: str = ""
    createdBy: str = ""
    lastUpdatedAt: str = ""
    lastUpdatedBy: str = ""


@dataclass(frozen=True)
class Issue:
    field: str
    message: str


@dataclass
class ValidationReport:
    errors: list[Issue] = field(default_factory=list)
    warnings: list[Issue] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.errors

    def error(self, fld: str, message: str) -> None:
        self.errors.append(Issue(fld, message))

    def warn(self, fld: str, message: str) -> None:
        self.warnings.append(Issue(fld, message))

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "errors": [{"field": i.field, "message": i.message} for i in self.errors],
            "warnings": [{"field": i.field, "message": i.message} for i in self.warnings],
        }


ENTITY_TYPES: dict[str, type] = {}
PHASE_OF_KIND: dict[str, int] = {}


def entity(kind: str, phase: int):
    def wrap(cls):
        ENTITY_TYPES[kind] = cls
        PHASE_OF_KIND[kind] = phase
        cls.KIND = kind
        return cls

    return wrap


# ---------------------------------------------------------------------------
# Phase 1: study definition
# ---------------------------------------------------------------------------


@entity("Organization", phase=1)
@dataclass
class Organization:
    name: str = ""
    address: str = ""


@entity("Personnel", phase=1)
@dataclass
class Personnel:
    organizationId: str = ref("Organization")
    name: str = ""
    email: str = ""


@entity("Study", phase=1)
@dataclass
class Study:
    name: str = ""
    description: str = ""
    objectives: str = ""
    ethics: str = ""


@entity("Experiment", phase=1)
@dataclass
class Experiment:
    studyId: str = ref("Study")
    researchQuestion: str = ""


@entity("Survey", phase=1)
@dataclass
class Survey:
    studyId: str = ref("Study")
    question: str = ""
    answer: str = ""
    category: str = "other"


@entity("Population", phase=1)
@dataclass
class Population:
    # Rendered in passports but absent from the core entity tables; attached
    # to the study, with an optional dataset-side link (Dataset.populationId).
    studyId: str = ref("Study")
    url: str = ""
    description: str = ""
    characteristics: str = ""


# ---------------------------------------------------------------------------
# Phase 2: dataset & featureset extraction
# ---------------------------------------------------------------------------


@entity("Feature", phase=2)
@dataclass
class Feature:
    featuresetId: str = ref("FeatureSet")
    title: str = ""
    description: str = ""
    dataType: str = "string"
    isOutcome: bool = False
    mandatory: bool = False
    isUnique: bool = False
    units: str = ""
    equipment: str = ""
    dataCollection: str = ""


@entity("FeatureSet", phase=2)
@dataclass
class FeatureSet:
    experimentId: str = ref("Experiment")
    title: str = ""
    description: str = ""
    url: str = ""


@entity("Dataset", phase=2)
@dataclass
class Dataset:
    featuresetId: str = ref("FeatureSet")
    populationId: str = ref("Population", optional=True)
    title: str = ""
    description: str = ""
    version: str = ""
    referenceEntity: str = ""
    numOfRecords: int = 0
    synthetic: bool = False


@entity("DatasetTransformation", phase=2)
@dataclass
class DatasetTransformation:
    title: str = ""
    description: str = ""
    steps: list = field(default_factory=list)  # [{name, kind, parameters}]


@entity("LearningDataset", phase=2)
@dataclass
class LearningDataset:
    datasetId: str = ref("Dataset")
    transformationId: str = ref("DatasetTransformation")
    description: str = ""


# ---------------------------------------------------------------------------
# Phase 3: model generation & evaluation
# ---------------------------------------------------------------------------


@entity("Algorithm", phase=3)
@dataclass
class Algorithm:
    name: str = ""
    type: str = ""


@entity("Implementation", phase=3)
@dataclass
class Implementation:
    algorithmId: str = ref("Algorithm")
    software: str = ""
    version: str = ""


@entity("LearningProcess", phase=3)
@dataclass
class LearningProcess:
    implementationId: str = ref("Implementation")
    learningDatasetId: str = ref("LearningDataset")
    description: str = ""


@entity("LearningStage", phase=3)
@dataclass
class LearningStage:
    learningProcessId: str = ref("LearningProcess")
    stageType: str = "training"
    description: str = ""
    datasetPercentage: int = 0


@entity("Model", phase=3)
@dataclass
class Model:
    learningProcessId: str = ref("LearningProcess")
    name: str = ""
    version: str = ""
    modelType: str = ""
    productIdentifier: str = ""
    owner: str = ""
    trlLevel: str = ""
    license: str = ""
    primaryUse: str = ""
    secondaryUse: str = ""
    intendedUsers: str = ""
    counterIndications: str = ""
    ethicalConsiderations: str = ""
    limitations: str = ""
    fairnessConstraints: str = ""


@entity("Parameter", phase=3)
@dataclass
class Parameter:
    name: str = ""
    dataType: str = "string"
    value: str = ""
    targetKind: str = "model"
    targetId: str = ""


@entity("EvaluationMeasure", phase=3)
@dataclass
class EvaluationMeasure:
    modelId: str = ref("Model")
    name: str = ""
    dataType: str = "float"
    value: str = ""
    description: str = ""


@entity("ModelFigure", phase=3)
@dataclass
class ModelFigure:
    modelId: str = ref("Model")
    caption: str = ""
    mediaType: str = ""
    payloadBase64: str = ""


# ---------------------------------------------------------------------------
# Phase 4: deployment & monitoring
# ---------------------------------------------------------------------------


@entity("ModelDeployment", phase=4)
@dataclass
class ModelDeployment:
    modelId: str = ref("Model")
    environmentId: str = ref("DeploymentEnvironment")
    tags: list = field(default_factory=list)
    status: str = "DRAFT"
    identifiedFailures: str = ""


@entity("DeploymentEnvironment", phase=4)
@dataclass
class DeploymentEnvironment:
    title: str = ""
    description: str = ""
    hardwareProperties: str = ""
    softwareProperties: str = ""
    connectivityDetails: str = ""


# ---------------------------------------------------------------------------
# Phase 5: passport generation
# ---------------------------------------------------------------------------


@entity("Passport", phase=5)
@dataclass
class Passport:
    deploymentId: str = ref("ModelDeployment")
    document: dict = field(default_factory=dict)

# AuditLog / AuditLogBook are phase-5 kinds but are not client-writable
# entities; they are produced by the registry itself (see audit module).
PHASE_OF_KIND["AuditLog"] = 5
PHASE_OF_KIND["AuditLogBook"] = 5

LIFECYCLE_KINDS = tuple(k for k in ENTITY_TYPES if k != "Passport")
ALL_KINDS = tuple(PHASE_OF_KIND)


class UnknownKind(Exception):
    def __init__(self, kind: str):
        super().__init__(f"unknown entity kind: {kind!r}")
        self.kind = kind


def phase_of(kind: str) -> int:
    """Lifecycle phase (1..5) for an entity kind."""
    try:
        return PHASE_OF_KIND[kind]
    except KeyError:
        raise UnknownKind(kind) from None


REQUIRED_TEXT_FIELDS: dict[str, tuple[str, ...]] = {
    "Organization": ("name",),
    "Study": ("name",),
    "Experiment": ("researchQuestion",),
    "Survey": ("question",),
    "DeploymentEnvironment": ("title",),
    "Algorithm": ("name",),
    "Feature": ("title",),
    "Model": ("name",),
    "Parameter": ("name",),
    "EvaluationMeasure": ("name",),
}

ENUM_FIELDS: dict[str, dict[str, type[enum.Enum]]] = {
    "Survey": {"category": SurveyCategory},
    "Feature": {"dataType": FeatureDataType},
    "LearningStage": {"stageType": StageType},
    "ModelDeployment": {"status": DeploymentStatus},
    "Parameter": {"dataType": ParameterDataType},
    "EvaluationMeasure": {"dataType": MeasureDataType},
}


def _parses_as(value: str, data_type: str) -> bool:
    try:
        if data_type == "integer":
            int(value)
        elif data_type in ("decimal", "float"):
            float(value)
        elif data_type == "boolean":
            if value.lower() not in ("true", "false", "0", "1"):
                return False
        return True
    except (ValueError, AttributeError):
        return False


def reference_fields(kind: str) -> dict[str, dict]:
    """field name -> {'ref': kind, 'optional': bool} for declared id fields."""
    cls = ENTITY_TYPES.get(kind)
    if cls is None:
        raise UnknownKind(kind)
    out = {}
    for f in fields(cls):
        if "ref" in f.metadata:
            out[f.name] = dict(f.metadata)
    return out


@dataclass(frozen=True)
class RefTarget:
    field: str
    kind: str
    id: str


def reference_targets(ent: Any) -> list[RefTarget]:
    """All outbound references of an entity, optional-and-empty ones skipped."""
    kind = ent.KIND
    out = []
    for name, meta in reference_fields(kind).items():
        value = getattr(ent, name)
        if meta.get("optional") and not value:
            continue
        out.append(RefTarget(name, meta["ref"], value))
    if kind == "Parameter":
        target_kind = PARAMETER_TARGET_KINDS.get(ent.targetKind)
        if target_kind:
            out.append(RefTarget("targetId", target_kind, ent.targetId))
    return out


def validate(ent: Any) -> ValidationReport:
    """Check the entity's intrinsic invariants.

    Never raises; every violation is reported. Cross-entity rules (reference
    resolution, uniqueness) are enforced by the registry store.
    """
    report = ValidationReport()
    kind = getattr(ent, "KIND", None)
    if kind not in ENTITY_TYPES:
        report.error("", f"unknown entity kind: {kind!r}")
        return report

    for f in fields(ent):
        value = getattr(ent, f.name)
        if f.type == "str" and not isinstance(value, str):
            report.error(f.name, "must be a string")
        elif f.type == "int" and (isinstance(value, bool) or not isinstance(value, int)):
            report.error(f.name, "must be an integer")
        elif f.type == "bool" and not isinstance(value, bool):
            report.error(f.name, "must be a boolean")
        elif f.type == "list" and not isinstance(value, list):
            report.error(f.name, "must be a list")

    for fld in REQUIRED_TEXT_FIELDS.get(kind, ()):
        value = getattr(ent, fld, "")
        if not isinstance(value, str) or not value.strip():
            report.error(fld, "must be non-empty")

    for fld, enum_cls in ENUM_FIELDS.get(kind, {}).items():
        value = getattr(ent, fld)
        allowed = {e.value for e in enum_cls}
        if value not in allowed:
            report.error(fld, f"must be one of {sorted(allowed)}")

    # required reference fields must carry an id
    for name, meta in reference_fields(kind).items():
        value = getattr(ent, name)
        if not meta.get("optional") and (not isinstance(value, str) or not value):
            report.error(name, "reference id required")

    if kind == "LearningStage":
        pct = ent.datasetPercentage
        if isinstance(pct, int) and not isinstance(pct, bool):
            if not 0 <= pct <= 100:
                report.error("datasetPercentage", "must be between 0 and 100")
    elif kind == "Dataset":
        n = ent.numOfRecords
        if isinstance(n, int) and not isinstance(n, bool) and n < 0:
            report.error("numOfRecords", "must be non-negative")
    elif kind == "Model":
        if ent.trlLevel and not TRL_PATTERN.match(ent.trlLevel):
            report.error("trlLevel", "must match TRL1..TRL9")
    elif kind == "Parameter":
        if ent.targetKind not in PARAMETER_TARGET_KINDS:
            report.error("targetKind", f"must be one of {sorted(PARAMETER_TARGET_KINDS)}")
        if not ent.targetId:
            report.error("targetId", "reference id required")
        if ent.dataType in {e.value for e in ParameterDataType} and not _parses_as(ent.value, ent.dataType):
            report.error("value", f"does not parse as {ent.dataType}")
    elif kind == "EvaluationMeasure":
        if ent.dataType in {e.value for e in MeasureDataType} and not _parses_as(ent.value, ent.dataType):
            report.error("value", f"does not parse as {ent.dataType}")
    elif kind == "DatasetTransformation":
        if isinstance(ent.steps, list):
            step_kinds = {e.value for e in TransformationStepKind}
            for i, step in enumerate(ent.steps):
                if not isinstance(step, dict):
                    report.error(f"steps[{i}]", "must be an object")
                    continue
                if not str(step.get("name", "")).strip():
                    report.error(f"steps[{i}].name", "must be non-empty")
                if step.get("kind", "other") not in step_kinds:
                    report.error(f"steps[{i}].kind", f"must be one of {sorted(step_kinds)}")

    return report


def check_stage_percentages(stages: list) -> ValidationReport:
    """Soft check that one learning process's stage splits sum to 100."""
    report = ValidationReport()
    pcts = [s.datasetPercentage for s in stages
            if isinstance(s.datasetPercentage, int) and not isinstance(s.datasetPercentage, bool)]
    if pcts and sum(pcts) != 100:
        report.warn("datasetPercentage", f"stage percentages sum to {sum(pcts)}, not 100")
    return report


def parse_entity(kind: str, data: dict) -> tuple[Any, ValidationReport]:
    """Build an entity from a JSON object and validate it.

    Unknown fields are reported as errors so that client typos surface
    instead of silently dropping data.
    """
    cls = ENTITY_TYPES.get(kind)
    if cls is None:
        raise UnknownKind(kind)
    known = {f.name for f in fields(cls)}
    report = ValidationReport()
    clean = {}
    for key, value in data.items():
        if key not in known:
            report.error(key, "unknown field")
        else:
            clean[key] = value
    ent = cls()
    for key, value in clean.items():
        setattr(ent, key, value)
    inner = validate(ent)
    report.errors.extend(inner.errors)
    report.warnings.extend(inner.warnings)
    return ent, report


def entity_to_dict(ent: Any) -> dict:
    assert is_dataclass(ent)
    return asdict(ent)

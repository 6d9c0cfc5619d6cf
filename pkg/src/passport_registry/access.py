"""Authentication and study-scoped, deny-by-default authorization.

Tokens are self-contained signed claims (no server-side session table):
base64url(JSON claims) + "." + HMAC-SHA256 over the claims. An expired token
is reported distinctly from a forged one so clients can refresh instead of
re-prompting for credentials.
"""

from __future__ import annotations

import base64
import enum
import hashlib
import hmac
import json
import secrets
import time
from dataclasses import dataclass, field

from . import domain


class Role(str, enum.Enum):
    ADMIN = "Admin"
    ORGANIZATION_ADMIN = "OrganizationAdmin"
    STUDY_OWNER = "StudyOwner"
    SURVEY_MANAGER = "SurveyManager"
    DATA_ENGINEER = "DataEngineer"
    DATA_SCIENTIST = "DataScientist"
    ML_ENGINEER = "MLEngineer"
    QUALITY_ASSURANCE_SPECIALIST = "QualityAssuranceSpecialist"


GLOBAL_ROLES = frozenset({Role.ADMIN, Role.ORGANIZATION_ADMIN})

ACTIONS = ("CREATE", "READ", "UPDATE", "DELETE")

# Write grants per role: the transcribed role/phase responsibilities, with
# the figure-only entities (Population, ModelFigure) assigned to the role
# owning their phase.
WRITE_GRANTS: dict[Role, frozenset[str]] = {
    Role.ADMIN: frozenset(),  # accounts & system configuration only
    Role.ORGANIZATION_ADMIN: frozenset({"Organization", "Personnel"}),
    Role.STUDY_OWNER: frozenset({"Study", "Experiment", "Population"}),
    Role.SURVEY_MANAGER: frozenset({"Survey"}),
    Role.DATA_ENGINEER: frozenset({
        "Feature", "FeatureSet", "Dataset", "DatasetTransformation",
        "LearningDataset"}),
    Role.DATA_SCIENTIST: frozenset({
        "Algorithm", "Implementation", "LearningProcess", "LearningStage",
        "Model", "Parameter", "EvaluationMeasure", "ModelFigure"}),
    Role.ML_ENGINEER: frozenset({"ModelDeployment", "DeploymentEnvironment"}),
    Role.QUALITY_ASSURANCE_SPECIALIST: frozenset({"Passport"}),
}

ENTITY_KINDS = tuple(domain.ENTITY_TYPES)

# Read grants: study-scoped roles may read every kind within their study
# (plus the globally shared Organization/Personnel records); Admin reads
# everything; OrganizationAdmin reads only what it manages.
READ_GRANTS: dict[Role, frozenset[str]] = {
    Role.ADMIN: frozenset(ENTITY_KINDS),
    Role.ORGANIZATION_ADMIN: frozenset({"Organization", "Personnel"}),
    **{role: frozenset(ENTITY_KINDS) for role in (
        Role.STUDY_OWNER, Role.SURVEY_MANAGER, Role.DATA_ENGINEER,
        Role.DATA_SCIENTIST, Role.ML_ENGINEER,
        Role.QUALITY_ASSURANCE_SPECIALIST)},
}


def grant_table() -> frozenset[tuple[str, str, str]]:
    """The full (role, action, kind) grant set; deny-by-default elsewhere."""
    grants = set()
    for role in Role:
        for kind in READ_GRANTS.get(role, frozenset()):
            grants.add((role.value, "READ", kind))
        for kind in WRITE_GRANTS.get(role, frozenset()):
            for action in ("CREATE", "UPDATE", "DELETE"):
                grants.add((role.value, action, kind))
    return frozenset(grants)


GRANTS = grant_table()


@dataclass(frozen=True)
class RoleAssignment:
    role: str
    studyId: str = ""  # empty only for Admin / OrganizationAdmin


@dataclass
class Claims:
    subject: str
    assignments: list[RoleAssignment] = field(default_factory=list)
    personnelId: str = ""
    issuedAt: float = 0.0
    expiresAt: float = 0.0

    def roles(self) -> set[str]:
        return {a.role for a in self.assignments}


@dataclass(frozen=True)
class Decision:
    allowed: bool
    reason: str = ""


def authorize(claims: Claims, action: str, kind: str, study_id: str = "") -> Decision:
    """Allow iff some assignment grants (action, kind) in the right scope."""
    if action not in ACTIONS:
        return Decision(False, f"unknown action {action!r}")
    if kind not in domain.ENTITY_TYPES:
        return Decision(False, f"unknown entity kind {kind!r}")
    for assignment in claims.assignments:
        try:
            role = Role(assignment.role)
        except ValueError:
            continue
        if (role.value, action, kind) not in GRANTS:
            continue
        if role in GLOBAL_ROLES:
            return Decision(True)
        if kind in ("Organization", "Personnel") and action == "READ":
            # shared records: readable by any study-scoped assignment
            return Decision(True)
        if kind == "Study" and action == "CREATE":
            # a StudyOwner creates a study before any scope for it exists
            return Decision(True)
        if assignment.studyId and assignment.studyId == study_id:
            return Decision(True)
    return Decision(False, f"no assignment grants {action} on {kind} "
                           f"in study {study_id!r}")


def can_assign_roles(claims: Claims, study_id: str) -> bool:
    for assignment in claims.assignments:
        if assignment.role == Role.ADMIN.value:
            return True
        if (assignment.role == Role.STUDY_OWNER.value
                and assignment.studyId == study_id):
            return True
    return False


class TokenError(Exception):
    pass


class TokenExpired(TokenError):
    pass


class TokenInvalid(TokenError):
    pass


class BadCredentials(Exception):
    """Unknown user and wrong password are deliberately indistinguishable."""


class AccountDisabled(Exception):
    pass


def _b64(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).decode().rstrip("=")


def _unb64(text: str) -> bytes:
    pad = "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(text + pad)


class TokenService:
    def __init__(self, secret: bytes, lifetime_seconds: int = 900,
                 clock=time.time):
        self._secret = secret
        self.lifetime = lifetime_seconds
        self._clock = clock

    def issue(self, subject: str, assignments: list[RoleAssignment],
              personnel_id: str = "") -> str:
        now = self._clock()
        payload = {
            "subject": subject,
            "personnelId": personnel_id,
            "assignments": [{"role": a.role, "studyId": a.studyId}
                            for a in assignments],
            "issuedAt": now,
            "expiresAt": now + self.lifetime,
        }
        body = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        sig = hmac.new(self._secret, body, hashlib.sha256).digest()
        return f"{_b64(body)}.{_b64(sig)}"

    def validate(self, token: str) -> Claims:
        try:
            body_b64, sig_b64 = token.split(".")
            body = _unb64(body_b64)
            sig = _unb64(sig_b64)
        except (ValueError, TypeError):
            raise TokenInvalid("malformed token") from None
        expected = hmac.new(self._secret, body, hashlib.sha256).digest()
        if not hmac.compare_digest(sig, expected):
            raise TokenInvalid("bad signature")
        try:
            payload = json.loads(body)
        except ValueError:
            raise TokenInvalid("bad payload") from None
        if self._clock() >= payload.get("expiresAt", 0):
            raise TokenExpired("token expired")
        return Claims(
            subject=payload["subject"],
            personnelId=payload.get("personnelId", ""),
            assignments=[RoleAssignment(a["role"], a.get("studyId", ""))
                         for a in payload.get("assignments", [])],
            issuedAt=payload["issuedAt"],
            expiresAt=payload["expiresAt"],
        )


def _hash_password(password: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", password.encode(), salt, 120_000)


@dataclass
class Account:
    username: str
    salt: bytes
    password_hash: bytes
    personnel_id: str = ""
    assignments: list[RoleAssignment] = field(default_factory=list)
    disabled: bool = False


class AccountStore:
    """In-memory accounts seeded from config; replaceable by an external
    identity provider behind the same authenticate() surface."""

    def __init__(self, token_service: TokenService, registry=None):
        self._accounts: dict[str, Account] = {}
        self._tokens = token_service
        self._registry = registry  # optional: merges persisted assignments

    def add_account(self, username: str, password: str,
                    assignments: list[RoleAssignment],
                    personnel_id: str = "", disabled: bool = False) -> None:
        salt = secrets.token_bytes(16)
        self._accounts[username] = Account(
            username=username, salt=salt,
            password_hash=_hash_password(password, salt),
            personnel_id=personnel_id, assignments=list(assignments),
            disabled=disabled)

    def load_seed(self, seed: dict) -> None:
        for acc in seed.get("accounts", []):
            self.add_account(
                acc["username"], acc["password"],
                [RoleAssignment(a["role"], a.get("studyId", ""))
                 for a in acc.get("assignments", [])],
                personnel_id=acc.get("personnelId", ""),
                disabled=acc.get("disabled", False))

    def authenticate(self, username: str, password: str) -> str:
        account = self._accounts.get(username)
        if account is None:
            # burn comparable time so unknown-user is not observable
            _hash_password(password, b"\x00" * 16)
            raise BadCredentials("invalid username or password")
        if not hmac.compare_digest(
                _hash_password(password, account.salt), account.password_hash):
            raise BadCredentials("invalid username or password")
        if account.disabled:
            raise AccountDisabled(f"account {username!r} is disabled")
        assignments = list(account.assignments)
        if self._registry is not None and account.personnel_id:
            for extra in self._registry.role_assignments(account.personnel_id):
                ra = RoleAssignment(extra["role"], extra["studyId"])
                if ra not in assignments:
                    assignments.append(ra)
        return self._tokens.issue(username, assignments, account.personnel_id)

    def personnel_id_of(self, username: str) -> str:
        account = self._accounts.get(username)
        return account.personnel_id if account else ""

"""HTTP/JSON surface over the registry, access control, audit and compiler.

Error contract: 401 token_expired / token_invalid, 403 forbidden,
404 not_found, 409 version_conflict / duplicate_key / referenced_by,
422 validation_failed / broken_reference / broken_chain / empty_detail.
Optimistic-concurrency versions travel as an If-Match header on PUT/DELETE.
"""

from __future__ import annotations

import json
import re

from fastapi import APIRouter, Depends, FastAPI, Header, Query, Request, Response
from fastapi.responses import JSONResponse

from . import access, domain, passport as pp, store as storemod
from .access import (AccountDisabled, AccountStore, BadCredentials, Claims,
                     Role, TokenExpired, TokenInvalid, TokenService)
from .config import AppConfig
from .passport import DetailConfig, EmptyDetail, PassportSigner
from .store import (BrokenChain, BrokenReference, CrossStudyReference,
                    DuplicateKey, NotFound, ReferencedBy, RegistryError,
                    RegistryStore, ValidationFailed, VersionConflict)

def _plural_path(kind: str) -> str:
    base = re.sub(r"(?<!^)(?=[A-Z])", "-", kind).lower()
    return base + ("es" if base.endswith("s") else "s")


KIND_PATHS = {kind: _plural_path(kind) for kind in domain.ENTITY_TYPES}
KIND_PATHS["Personnel"] = "personnel"
KIND_PATHS["Study"] = "studies"
PATH_KINDS = {v: k for k, v in KIND_PATHS.items()}

STATUS_OF_CODE = {
    "not_found": 404,
    "unknown_kind": 404,
    "version_conflict": 409,
    "duplicate_key": 409,
    "referenced_by": 409,
    "validation_failed": 422,
    "broken_reference": 422,
    "cross_study_reference": 422,
    "broken_chain": 422,
}


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details=None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details


def _forbidden(reason: str) -> ApiError:
    return ApiError(403, "forbidden", reason)


def _require(claims: Claims, action: str, kind: str, study_id: str = "") -> None:
    decision = access.authorize(claims, action, kind, study_id)
    if not decision.allowed:
        raise _forbidden(decision.reason)


def create_app(config: AppConfig) -> FastAPI:
    store = RegistryStore(config.db_path)
    tokens = TokenService(config.token_secret(), config.token_lifetime_seconds)
    accounts = AccountStore(tokens, registry=store)
    if config.accounts_path:
        with open(config.accounts_path) as fh:
            accounts.load_seed(json.load(fh))
    signer = PassportSigner.load_or_create(config.signing_key_path)

    app = FastAPI(title="AI Product Passport Registry", docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.accounts = accounts
    app.state.signer = signer
    router = APIRouter(prefix=config.base_path)

    # -- error translation --------------------------------------------------

    @app.exception_handler(ApiError)
    async def on_api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={
            "status": exc.status, "code": exc.code,
            "message": exc.message, "details": exc.details})

    @app.exception_handler(RegistryError)
    async def on_registry_error(_req: Request, exc: RegistryError):
        status = STATUS_OF_CODE.get(exc.code, 400)
        return JSONResponse(status_code=status, content={
            "status": status, "code": exc.code,
            "message": str(exc), "details": exc.details})

    @app.exception_handler(domain.UnknownKind)
    async def on_unknown_kind(_req: Request, exc: domain.UnknownKind):
        return JSONResponse(status_code=404, content={
            "status": 404, "code": "unknown_kind", "message": str(exc),
            "details": None})

    # -- authentication -----------------------------------------------------

    def current_claims(authorization: str | None = Header(default=None)) -> Claims:
        if not authorization or not authorization.startswith("Bearer "):
            raise ApiError(401, "token_missing", "missing bearer token")
        try:
            return tokens.validate(authorization[len("Bearer "):])
        except TokenExpired:
            raise ApiError(401, "token_expired", "token expired") from None
        except TokenInvalid:
            raise ApiError(401, "token_invalid", "invalid token") from None

    @router.post("/auth/login")
    def login(body: dict):
        username = str(body.get("username", ""))
        password = str(body.get("password", ""))
        try:
            token = accounts.authenticate(username, password)
        except BadCredentials:
            raise ApiError(401, "bad_credentials",
                           "invalid username or password") from None
        except AccountDisabled:
            raise ApiError(403, "account_disabled", "account disabled") from None
        claims = tokens.validate(token)
        return {
            "token": token,
            "expiresIn": tokens.lifetime,
            "subject": claims.subject,
            "assignments": [{"role": a.role, "studyId": a.studyId}
                            for a in claims.assignments],
        }

    # -- audit (system administration) --------------------------------------

    @router.get("/audit")
    def full_audit(claims: Claims = Depends(current_claims)):
        if Role.ADMIN.value not in claims.roles():
            raise _forbidden("audit stream requires the Admin role")
        return {"entries": [e.to_dict() for e in store.audit_entries()]}

    # -- role assignment -----------------------------------------------------

    @router.post("/studies/{sid}/roles", status_code=201)
    def assign_role(sid: str, body: dict, claims: Claims = Depends(current_claims)):
        if not access.can_assign_roles(claims, sid):
            raise _forbidden("only the study owner or an admin assigns roles")
        role = str(body.get("role", ""))
        if role not in {r.value for r in Role}:
            raise ApiError(422, "validation_failed", f"unknown role {role!r}")
        personnel_id = str(body.get("personnelId", ""))
        try:
            person = store.get(personnel_id)
        except NotFound:
            raise ApiError(404, "unknown_personnel",
                           f"no personnel with id {personnel_id!r}") from None
        if person.kind != "Personnel":
            raise ApiError(422, "validation_failed",
                           f"{personnel_id!r} is not a Personnel record")
        return store.add_role_assignment(personnel_id, role, sid, claims.subject)

    # -- passports -----------------------------------------------------------

    def _passport(pid: str) -> storemod.StoredEntity:
        ent = store.get(pid)
        if ent.kind != "Passport":
            raise NotFound(f"no passport with id {pid!r}")
        return ent

    def _detail_from_body(body: dict) -> DetailConfig:
        sections = body.get("sections")
        if sections is None:
            return DetailConfig.full()
        try:
            return DetailConfig.of(sections)
        except EmptyDetail:
            raise ApiError(422, "empty_detail",
                           "detail selection must not be empty") from None

    @router.post("/deployments/{deployment_id}/passports", status_code=201)
    def compile_passport(deployment_id: str, body: dict,
                         claims: Claims = Depends(current_claims)):
        deployment = store.get(deployment_id)
        if deployment.kind != "ModelDeployment":
            raise NotFound(f"no deployment with id {deployment_id!r}")
        _require(claims, "CREATE", "Passport", deployment.studyId)
        detail = _detail_from_body(body)
        ent = pp.create_passport(store, deployment_id, detail, claims.subject)
        return ent.to_dict()

    @router.get("/passports/{pid}")
    def get_passport(pid: str, claims: Claims = Depends(current_claims)):
        ent = _passport(pid)
        _require(claims, "READ", "Passport", ent.studyId)
        return Response(content=pp.canonical_bytes(ent.body["document"]),
                        media_type="application/json",
                        headers={"ETag": str(ent.version)})

    @router.put("/passports/{pid}")
    def update_passport(pid: str, body: dict,
                        if_match: str | None = Header(default=None),
                        claims: Claims = Depends(current_claims)):
        ent = _passport(pid)
        _require(claims, "UPDATE", "Passport", ent.studyId)
        if if_match is None:
            raise ApiError(422, "validation_failed", "If-Match header required")
        if int(if_match) != ent.version:
            raise VersionConflict(
                f"expected version {if_match}, stored version is {ent.version}")
        detail = _detail_from_body(body)
        return pp.recompile_passport(store, pid, detail, claims.subject).to_dict()

    @router.get("/passports/{pid}/report")
    def passport_report(pid: str, claims: Claims = Depends(current_claims)):
        ent = _passport(pid)
        _require(claims, "READ", "Passport", ent.studyId)
        return Response(content=pp.render_report(ent.body["document"]),
                        media_type="text/markdown; charset=utf-8")

    @router.get("/passports/{pid}/signature")
    def passport_signature(pid: str, claims: Claims = Depends(current_claims)):
        ent = _passport(pid)
        _require(claims, "READ", "Passport", ent.studyId)
        envelope = signer.sign_document(ent.body["document"])
        return {**envelope.to_dict(),
                "publicKeyPem": signer.public_pem().decode()}

    @router.get("/passports/{pid}/logbook")
    def passport_logbook(pid: str, claims: Claims = Depends(current_claims)):
        ent = _passport(pid)
        _require(claims, "READ", "Passport", ent.studyId)
        ids = set(ent.body["document"]["sourceVersions"]) | {pid}
        entries = store.audit_entries(ids)
        return {"passportId": pid, "entries": [e.to_dict() for e in entries]}

    # -- results submission (training-side batch) ----------------------------

    @router.post("/studies/{sid}/experiments/{eid}/results", status_code=201)
    def submit_results(sid: str, eid: str, body: dict,
                       claims: Claims = Depends(current_claims)):
        _require(claims, "CREATE", "Model", sid)
        experiment = store.get(eid)
        if experiment.kind != "Experiment" or experiment.studyId != sid:
            raise NotFound(f"no experiment {eid!r} in study {sid!r}")
        model_info = body.get("modelInfo") or {}
        stages = body.get("learningStages") or []
        measures = body.get("evaluationMeasures") or []
        actor = claims.subject
        with store.transaction():
            process_id = _ensure_learning_process(store, sid, eid, actor)
            model_data = dict(model_info)
            model_data["learningProcessId"] = process_id
            model = store.create("Model", model_data, actor, study_id=sid)
            stage_ids = []
            for stage in stages:
                stage_ids.append(store.create("LearningStage", {
                    "learningProcessId": process_id,
                    "stageType": _normalize_stage_type(
                        stage.get("learningStageType", stage.get("stageType", ""))),
                    "description": stage.get("description", ""),
                    "datasetPercentage": stage.get("datasetPercentage", 0),
                }, actor, study_id=sid).id)
            measure_ids = []
            for measure in measures:
                measure_ids.append(store.create("EvaluationMeasure", {
                    "modelId": model.id,
                    "name": measure.get("name", ""),
                    "dataType": measure.get("dataType", "float"),
                    "value": measure.get("value", ""),
                    "description": measure.get("description", ""),
                }, actor, study_id=sid).id)
        return {"modelId": model.id, "learningStageIds": stage_ids,
                "evaluationMeasureIds": measure_ids}

    # -- global-kind collections ---------------------------------------------

    def _serialize_page(items, total, page, page_size):
        return {"items": [e.to_dict() for e in items], "total": total,
                "page": page, "pageSize": page_size}

    def _collection_get(kind: str, study_id: str | None, page, page_size, search):
        items, total = store.list(kind, study_id=study_id, page=page,
                                  page_size=page_size, search=search)
        return _serialize_page(items, total, page, page_size)

    @router.post("/organizations", status_code=201)
    @router.post("/personnel", status_code=201)
    def create_global(request: Request, body: dict,
                      claims: Claims = Depends(current_claims)):
        kind = PATH_KINDS[request.url.path.rstrip("/").rsplit("/", 1)[-1]]
        _require(claims, "CREATE", kind)
        return store.create(kind, body, claims.subject).to_dict()

    @router.get("/organizations")
    @router.get("/personnel")
    def list_global(request: Request, claims: Claims = Depends(current_claims),
                    page: int = Query(default=1),
                    pageSize: int = Query(default=20),
                    search: str = Query(default="")):
        kind = PATH_KINDS[request.url.path.rstrip("/").rsplit("/", 1)[-1]]
        _require(claims, "READ", kind)
        return _collection_get(kind, None, page, pageSize, search)

    # -- studies -------------------------------------------------------------

    @router.post("/studies", status_code=201)
    def create_study(body: dict, claims: Claims = Depends(current_claims)):
        _require(claims, "CREATE", "Study")
        ent = store.create("Study", body, claims.subject)
        # the creator owns the new study
        personnel_id = accounts.personnel_id_of(claims.subject)
        if personnel_id:
            store.add_role_assignment(
                personnel_id, Role.STUDY_OWNER.value, ent.id, claims.subject)
        return ent.to_dict()

    @router.get("/studies")
    def list_studies(claims: Claims = Depends(current_claims),
                     page: int = Query(default=1),
                     pageSize: int = Query(default=20),
                     search: str = Query(default="")):
        if not any(access.authorize(claims, "READ", "Study", a.studyId).allowed
                   for a in claims.assignments):
            raise _forbidden("no assignment grants READ on Study")
        items, _total = store.list("Study", page=1, page_size=100_000,
                                   search=search)
        if Role.ADMIN.value not in claims.roles():
            visible = {a.studyId for a in claims.assignments if a.studyId}
            items = [e for e in items if e.id in visible]
        total = len(items)
        start = (page - 1) * pageSize
        return _serialize_page(items[start:start + pageSize], total, page, pageSize)

    # -- study-scoped collections (generic) ----------------------------------

    @router.post("/studies/{sid}/{kind_path}", status_code=201)
    def create_in_study(sid: str, kind_path: str, body: dict,
                        claims: Claims = Depends(current_claims)):
        kind = PATH_KINDS.get(kind_path)
        if kind is None or kind in ("Organization", "Personnel", "Study", "Passport"):
            raise domain.UnknownKind(kind_path)
        study = store.get(sid)
        if study.kind != "Study":
            raise NotFound(f"no study with id {sid!r}")
        _require(claims, "CREATE", kind, sid)
        return store.create(kind, body, claims.subject, study_id=sid).to_dict()

    @router.get("/studies/{sid}/{kind_path}")
    def list_in_study(sid: str, kind_path: str,
                      claims: Claims = Depends(current_claims),
                      page: int = Query(default=1),
                      pageSize: int = Query(default=20),
                      search: str = Query(default="")):
        kind = PATH_KINDS.get(kind_path)
        if kind is None or kind in ("Organization", "Personnel", "Study"):
            raise domain.UnknownKind(kind_path)
        _require(claims, "READ", kind, sid)
        return _collection_get(kind, sid, page, pageSize, search)

    # -- generic item routes --------------------------------------------------

    @router.get("/{kind_path}/{entity_id}")
    def get_item(kind_path: str, entity_id: str,
                 claims: Claims = Depends(current_claims)):
        kind = PATH_KINDS.get(kind_path)
        if kind is None:
            raise domain.UnknownKind(kind_path)
        ent = store.get(entity_id)
        if ent.kind != kind:
            raise NotFound(f"no {kind} with id {entity_id!r}")
        _require(claims, "READ", kind, ent.studyId)
        return ent.to_dict()

    @router.put("/{kind_path}/{entity_id}")
    def update_item(kind_path: str, entity_id: str, body: dict,
                    if_match: str | None = Header(default=None),
                    claims: Claims = Depends(current_claims)):
        kind = PATH_KINDS.get(kind_path)
        if kind is None:
            raise domain.UnknownKind(kind_path)
        ent = store.get(entity_id)
        if ent.kind != kind:
            raise NotFound(f"no {kind} with id {entity_id!r}")
        _require(claims, "UPDATE", kind, ent.studyId)
        if if_match is None:
            raise ApiError(422, "validation_failed", "If-Match header required")
        try:
            expected = int(if_match)
        except ValueError:
            raise ApiError(422, "validation_failed",
                           "If-Match must be an integer version") from None
        return store.update(entity_id, body, expected, claims.subject).to_dict()

    @router.delete("/{kind_path}/{entity_id}", status_code=204)
    def delete_item(kind_path: str, entity_id: str,
                    claims: Claims = Depends(current_claims)):
        kind = PATH_KINDS.get(kind_path)
        if kind is None:
            raise domain.UnknownKind(kind_path)
        ent = store.get(entity_id)
        if ent.kind != kind:
            raise NotFound(f"no {kind} with id {entity_id!r}")
        _require(claims, "DELETE", kind, ent.studyId)
        store.delete(entity_id, claims.subject)
        return Response(status_code=204)

    app.include_router(router)
    return app


STAGE_TYPE_ALIASES = {
    "TRAINING": "training",
    "TEST": "testing",
    "TESTING": "testing",
    "VALIDATION": "validation",
    "FEDERATED_AGGREGATION": "federated_aggregation",
}


def _normalize_stage_type(raw: str) -> str:
    return STAGE_TYPE_ALIASES.get(str(raw).upper(), str(raw))


def _ensure_learning_process(store: RegistryStore, sid: str, eid: str,
                             actor: str) -> str:
    """Reuse the study's first learning process, or build a minimal stub
    chain so downstream passports still resolve end to end."""
    processes, _ = store.list("LearningProcess", study_id=sid, page_size=1)
    if processes:
        return processes[0].id
    fs = store.create("FeatureSet", {
        "experimentId": eid, "title": "unspecified",
        "description": "auto-created for submitted results"}, actor, study_id=sid)
    ds = store.create("Dataset", {
        "featuresetId": fs.id, "title": "unspecified",
        "description": "auto-created for submitted results"}, actor, study_id=sid)
    tr = store.create("DatasetTransformation", {
        "title": "unspecified", "steps": []}, actor, study_id=sid)
    ld = store.create("LearningDataset", {
        "datasetId": ds.id, "transformationId": tr.id,
        "description": "unspecified"}, actor, study_id=sid)
    alg = store.create("Algorithm", {"name": "unspecified"}, actor, study_id=sid)
    impl = store.create("Implementation", {
        "algorithmId": alg.id, "software": "unspecified"}, actor, study_id=sid)
    process = store.create("LearningProcess", {
        "implementationId": impl.id, "learningDatasetId": ld.id,
        "description": "unspecified"}, actor, study_id=sid)
    return process.id

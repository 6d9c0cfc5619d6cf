import json

import pytest

from conftest import BASE, login
from passport_registry.access import RoleAssignment, TokenService


# --- authentication ---------------------------------------------------------

def test_login_returns_token_and_assignments(client):
    r = client.post(f"{BASE}/auth/login",
                    json={"username": "data_scientist",
                          "password": "data_scientist"})
    assert r.status_code == 200
    body = r.json()
    assert body["subject"] == "data_scientist"
    assert {"role": "DataScientist", "studyId": "initial_study"} \
        in body["assignments"]
    assert body["expiresIn"] > 0


def test_login_bad_password(client):
    r = client.post(f"{BASE}/auth/login",
                    json={"username": "data_scientist", "password": "nope"})
    assert r.status_code == 401
    assert r.json()["code"] == "bad_credentials"


def test_missing_token(client):
    r = client.get(f"{BASE}/studies")
    assert r.status_code == 401
    assert r.json()["code"] == "token_missing"


def test_garbage_token(client):
    r = client.get(f"{BASE}/studies",
                   headers={"Authorization": "Bearer not.a.token"})
    assert r.status_code == 401
    assert r.json()["code"] == "token_invalid"


def test_expired_token_distinct_code(client, app_config):
    expired = TokenService(app_config.token_secret(), lifetime_seconds=-5) \
        .issue("data_scientist", [RoleAssignment("DataScientist",
                                                 "initial_study")])
    r = client.get(f"{BASE}/studies",
                   headers={"Authorization": f"Bearer {expired}"})
    assert r.status_code == 401
    assert r.json()["code"] == "token_expired"


# --- study listing & scoping ------------------------------------------------

def test_admin_sees_all_studies(client):
    r = client.get(f"{BASE}/studies", headers=login(client, "admin"))
    assert r.json()["total"] == 2


def test_scoped_user_sees_only_assigned_studies(client):
    r = client.get(f"{BASE}/studies", headers=login(client, "data_scientist"))
    body = r.json()
    assert body["total"] == 1
    assert body["items"][0]["id"] == "initial_study"


def test_study_search(client):
    r = client.get(f"{BASE}/studies", params={"search": "MAGGIC"},
                   headers=login(client, "study_owner"))
    assert r.json()["total"] == 1


def test_org_admin_cannot_list_studies(client):
    r = client.get(f"{BASE}/studies",
                   headers=login(client, "organization_admin"))
    assert r.status_code == 403


def test_cross_study_read_denied(client):
    # data_scientist is assigned to initial_study only
    headers = login(client, "data_scientist")
    r = client.get(f"{BASE}/studies/study_acute_hf/models", headers=headers)
    assert r.status_code == 403


# --- CRUD round trip --------------------------------------------------------

def test_create_read_update_delete_survey(client):
    headers = login(client, "survey_manager")
    r = client.post(f"{BASE}/studies/initial_study/surveys", headers=headers,
                    json={"studyId": "initial_study",
                          "question": "Was consent obtained?",
                          "answer": "Yes", "category": "ethics"})
    assert r.status_code == 201, r.text
    sid = r.json()["id"]
    assert r.json()["version"] == 1

    r = client.get(f"{BASE}/surveys/{sid}", headers=headers)
    assert r.status_code == 200
    assert r.json()["data"]["question"] == "Was consent obtained?"

    r = client.put(f"{BASE}/surveys/{sid}", headers={**headers, "If-Match": "1"},
                   json={"studyId": "initial_study",
                         "question": "Was consent obtained?",
                         "answer": "Yes, written", "category": "ethics"})
    assert r.status_code == 200
    assert r.json()["version"] == 2

    r = client.delete(f"{BASE}/surveys/{sid}", headers=headers)
    assert r.status_code == 204
    assert client.get(f"{BASE}/surveys/{sid}",
                      headers=headers).status_code == 404


def test_put_requires_if_match(client):
    headers = login(client, "survey_manager")
    r = client.put(f"{BASE}/surveys/survey_ethics", headers=headers,
                   json={"studyId": "initial_study", "question": "q",
                         "answer": "a", "category": "ethics"})
    assert r.status_code == 422
    assert r.json()["code"] == "validation_failed"


def test_put_stale_if_match_conflicts(client):
    headers = login(client, "survey_manager")
    survey = client.get(f"{BASE}/surveys/survey_ethics",
                        headers=headers).json()["data"]
    r = client.put(f"{BASE}/surveys/survey_ethics",
                   headers={**headers, "If-Match": "9"}, json=survey)
    assert r.status_code == 409
    assert r.json()["code"] == "version_conflict"


def test_create_invalid_entity_422(client):
    headers = login(client, "survey_manager")
    r = client.post(f"{BASE}/studies/initial_study/surveys", headers=headers,
                    json={"studyId": "initial_study", "question": "q",
                          "answer": "a", "category": "NOT_A_CATEGORY"})
    assert r.status_code == 422
    assert r.json()["code"] == "validation_failed"


def test_create_broken_reference_422(client):
    headers = login(client, "data_engineer")
    r = client.post(f"{BASE}/studies/initial_study/learning-datasets",
                    headers=headers,
                    json={"datasetId": "ghost", "transformationId": "ghost2",
                          "description": "x"})
    assert r.status_code == 422
    assert r.json()["code"] == "broken_reference"


def test_duplicate_key_409(client):
    headers = login(client, "data_scientist")
    r = client.post(f"{BASE}/studies/initial_study/models", headers=headers,
                    json={"learningProcessId": "learning_process_maggic",
                          "name": "MAGGIC-MLP Model (v1.0)", "version": "1.0"})
    assert r.status_code == 409
    assert r.json()["code"] == "duplicate_key"


def test_delete_referenced_entity_409(client):
    headers = login(client, "data_engineer")
    r = client.delete(f"{BASE}/datasets/dataset_maggic", headers=headers)
    assert r.status_code == 409
    assert r.json()["code"] == "referenced_by"


def test_unknown_collection_404(client):
    headers = login(client, "admin")
    r = client.get(f"{BASE}/studies/initial_study/gadgets", headers=headers)
    assert r.status_code == 404


def test_wrong_kind_for_id_404(client):
    headers = login(client, "data_scientist")
    r = client.get(f"{BASE}/models/dataset_maggic", headers=headers)
    assert r.status_code == 404


def test_forbidden_create_403(client):
    headers = login(client, "data_scientist")
    r = client.post(f"{BASE}/studies/initial_study/feature-sets",
                    headers=headers, json={"experimentId": "initial_experiment",
                                           "title": "another set"})
    assert r.status_code == 403
    assert r.json()["code"] == "forbidden"


# --- organizations / personnel ---------------------------------------------

def test_org_admin_manages_organizations(client):
    headers = login(client, "organization_admin")
    r = client.post(f"{BASE}/organizations", headers=headers,
                    json={"name": "Utrecht Medical Center"})
    assert r.status_code == 201
    r = client.get(f"{BASE}/organizations", headers=headers)
    assert r.json()["total"] == 2


def test_study_roles_can_read_but_not_write_organizations(client):
    headers = login(client, "data_scientist")
    assert client.get(f"{BASE}/organizations",
                      headers=headers).status_code == 200
    r = client.post(f"{BASE}/organizations", headers=headers,
                    json={"name": "Rogue Org"})
    assert r.status_code == 403


# --- role assignment --------------------------------------------------------

def test_owner_assigns_role_and_login_picks_it_up(client):
    headers = login(client, "study_owner")
    r = client.post(f"{BASE}/studies/study_acute_hf/roles", headers=headers,
                    json={"personnelId": "personnel_data_scientist",
                          "role": "DataScientist"})
    assert r.status_code == 201
    r = client.post(f"{BASE}/auth/login",
                    json={"username": "data_scientist",
                          "password": "data_scientist"})
    assert {"role": "DataScientist", "studyId": "study_acute_hf"} \
        in r.json()["assignments"]


def test_non_owner_cannot_assign_roles(client):
    headers = login(client, "data_engineer")
    r = client.post(f"{BASE}/studies/initial_study/roles", headers=headers,
                    json={"personnelId": "personnel_data_scientist",
                          "role": "DataScientist"})
    assert r.status_code == 403


def test_assign_role_unknown_personnel(client):
    headers = login(client, "admin")
    r = client.post(f"{BASE}/studies/initial_study/roles", headers=headers,
                    json={"personnelId": "ghost", "role": "DataScientist"})
    assert r.status_code == 404
    assert r.json()["code"] == "unknown_personnel"


# --- audit ------------------------------------------------------------------

def test_audit_requires_admin(client):
    assert client.get(f"{BASE}/audit",
                      headers=login(client, "admin")).status_code == 200
    assert client.get(f"{BASE}/audit",
                      headers=login(client, "study_owner")).status_code == 403


def test_audit_reflects_mutations(client):
    headers = login(client, "survey_manager")
    r = client.post(f"{BASE}/studies/initial_study/surveys", headers=headers,
                    json={"studyId": "initial_study", "question": "Audited?",
                          "answer": "yes", "category": "ethics"})
    sid = r.json()["id"]
    entries = client.get(f"{BASE}/audit",
                         headers=login(client, "admin")).json()["entries"]
    mine = [e for e in entries if e["entityId"] == sid]
    assert len(mine) == 1
    assert mine[0]["action"] == "CREATE"
    assert mine[0]["actorUsername"] == "survey_manager"


# --- passports over HTTP ----------------------------------------------------

def _compile(client, headers, sections=None):
    body = {} if sections is None else {"sections": sections}
    r = client.post(f"{BASE}/deployments/deployment_maggic/passports",
                    headers=headers, json=body)
    assert r.status_code == 201, r.text
    return r.json()


def test_compile_and_fetch_passport(client):
    headers = login(client, "quality_assurance_specialist")
    ent = _compile(client, headers)
    pid = ent["id"]
    r = client.get(f"{BASE}/passports/{pid}", headers=headers)
    assert r.status_code == 200
    assert r.headers["ETag"] == "1"
    doc = json.loads(r.content)
    assert doc["passportId"] == pid
    assert len(doc["sections"]) == 14


def test_compile_forbidden_for_other_roles(client):
    r = client.post(f"{BASE}/deployments/deployment_maggic/passports",
                    headers=login(client, "data_scientist"), json={})
    assert r.status_code == 403


def test_compile_with_selection(client):
    headers = login(client, "quality_assurance_specialist")
    ent = _compile(client, headers, sections=["study_details"])
    kinds = [s["kind"] for s in ent["data"]["document"]["sections"]]
    assert kinds == ["model_details", "study_details"]


def test_compile_empty_selection_422(client):
    headers = login(client, "quality_assurance_specialist")
    r = client.post(f"{BASE}/deployments/deployment_maggic/passports",
                    headers=headers, json={"sections": []})
    assert r.status_code == 422
    assert r.json()["code"] == "empty_detail"


def test_recompile_with_if_match(client):
    headers = login(client, "quality_assurance_specialist")
    pid = _compile(client, headers)["id"]
    r = client.put(f"{BASE}/passports/{pid}",
                   headers={**headers, "If-Match": "1"}, json={})
    assert r.status_code == 200
    assert r.json()["version"] == 2
    r = client.put(f"{BASE}/passports/{pid}",
                   headers={**headers, "If-Match": "1"}, json={})
    assert r.status_code == 409


def test_signature_verifies_against_served_bytes(client):
    from cryptography.hazmat.primitives import serialization

    from passport_registry.passport import SignatureEnvelope, verify

    headers = login(client, "quality_assurance_specialist")
    pid = _compile(client, headers)["id"]
    payload = client.get(f"{BASE}/passports/{pid}", headers=headers).content
    sig = client.get(f"{BASE}/passports/{pid}/signature",
                     headers=headers).json()
    public_key = serialization.load_pem_public_key(
        sig["publicKeyPem"].encode())
    envelope = SignatureEnvelope.from_dict(sig)
    assert verify(payload, envelope, public_key)
    assert not verify(payload + b" ", envelope, public_key)


def test_report_served_as_markdown(client):
    headers = login(client, "quality_assurance_specialist")
    pid = _compile(client, headers)["id"]
    r = client.get(f"{BASE}/passports/{pid}/report", headers=headers)
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("text/markdown")
    assert "MAGGIC-MLP Model (v1.0)" in r.text


def test_logbook_covers_sources(client):
    headers = login(client, "quality_assurance_specialist")
    ent = _compile(client, headers)
    pid = ent["id"]
    r = client.get(f"{BASE}/passports/{pid}/logbook", headers=headers)
    ids = {e["entityId"] for e in r.json()["entries"]}
    assert ids == set(ent["data"]["document"]["sourceVersions"]) | {pid}


def test_passport_routes_404_for_non_passport_id(client):
    headers = login(client, "quality_assurance_specialist")
    r = client.get(f"{BASE}/passports/dataset_maggic", headers=headers)
    assert r.status_code == 404


# --- results submission -----------------------------------------------------

RESULTS_BODY = {
    "modelInfo": {"name": "test", "modelType": "MLP", "version": "2.0"},
    "learningStages": [
        {"learningStageType": "TRAINING", "datasetPercentage": 70},
        {"learningStageType": "VALIDATION", "datasetPercentage": 15},
        {"learningStageType": "TEST", "datasetPercentage": 15},
    ],
    "evaluationMeasures": [
        {"name": "MAE", "dataType": "float", "value": "0.12"},
        {"name": "AUC", "dataType": "float", "value": "0.91"},
    ],
}


def test_submit_results_reuses_existing_process(client):
    headers = login(client, "data_scientist")
    r = client.post(
        f"{BASE}/studies/initial_study/experiments/initial_experiment/results",
        headers=headers, json=RESULTS_BODY)
    assert r.status_code == 201, r.text
    out = r.json()
    assert len(out["learningStageIds"]) == 3
    assert len(out["evaluationMeasureIds"]) == 2
    model = client.get(f"{BASE}/models/{out['modelId']}",
                       headers=headers).json()
    assert model["data"]["learningProcessId"] == "learning_process_maggic"
    stage = client.get(f"{BASE}/learning-stages/{out['learningStageIds'][2]}",
                       headers=headers).json()
    assert stage["data"]["stageType"] == "testing"


def test_submit_results_duplicate_model_atomic(client):
    headers = login(client, "data_scientist")
    url = (f"{BASE}/studies/initial_study/experiments/"
           "initial_experiment/results")
    assert client.post(url, headers=headers, json=RESULTS_BODY).status_code == 201

    before = client.get(f"{BASE}/studies/initial_study/learning-stages",
                        headers=headers,
                        params={"pageSize": 100}).json()["total"]
    r = client.post(url, headers=headers, json=RESULTS_BODY)
    assert r.status_code == 409  # same model name+version
    after = client.get(f"{BASE}/studies/initial_study/learning-stages",
                       headers=headers,
                       params={"pageSize": 100}).json()["total"]
    assert after == before  # nothing from the failed batch persisted


def test_submit_results_forbidden_for_non_scientist(client):
    r = client.post(
        f"{BASE}/studies/initial_study/experiments/initial_experiment/results",
        headers=login(client, "ml_engineer"), json=RESULTS_BODY)
    assert r.status_code == 403


def test_submit_results_builds_stub_chain_in_fresh_study(client):
    owner = login(client, "study_owner")
    r = client.post(f"{BASE}/studies", headers=owner,
                    json={"name": "Fresh Study"})
    assert r.status_code == 201
    sid = r.json()["id"]
    owner = login(client, "study_owner")  # token now carries the new study
    r = client.post(f"{BASE}/studies/{sid}/experiments", headers=owner,
                    json={"studyId": sid,
                          "researchQuestion": "Does the stub chain resolve?"})
    assert r.status_code == 201, r.text
    eid = r.json()["id"]
    client.post(f"{BASE}/studies/{sid}/roles", headers=owner,
                json={"personnelId": "personnel_data_scientist",
                      "role": "DataScientist"})
    ds = login(client, "data_scientist")
    r = client.post(f"{BASE}/studies/{sid}/experiments/{eid}/results",
                    headers=ds, json=RESULTS_BODY)
    assert r.status_code == 201, r.text
    model = client.get(f"{BASE}/models/{r.json()['modelId']}",
                       headers=ds).json()
    process = client.get(
        f"{BASE}/learning-processes/{model['data']['learningProcessId']}",
        headers=ds).json()
    assert process["data"]["description"] == "unspecified"


def test_study_creator_becomes_owner(client):
    owner = login(client, "study_owner")
    sid = client.post(f"{BASE}/studies", headers=owner,
                      json={"name": "Owned Study"}).json()["id"]
    r = client.post(f"{BASE}/auth/login",
                    json={"username": "study_owner",
                          "password": "study_owner"})
    assert {"role": "StudyOwner", "studyId": sid} in r.json()["assignments"]

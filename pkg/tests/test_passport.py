import importlib.util
import itertools
import json
import pathlib
import random

import pytest
from hypothesis import given, settings, strategies as st

from passport_registry import passport as pp
from passport_registry import store as store_mod
from passport_registry.passport import (
    DetailConfig, EmptyDetail, PassportSigner, SECTION_ORDER, SectionKind,
    apply_detail, canonical_bytes, compile_document, create_passport,
    recompile_passport, render_report, sign, verify,
)
from passport_registry.store import RegistryStore, ValidationFailed
from conftest import FIXTURE_PATH

SCRIPTS = pathlib.Path(__file__).resolve().parents[1] / "scripts"
DATA = pathlib.Path(__file__).resolve().parent / "data"


def _load_canonicalizer():
    spec = importlib.util.spec_from_file_location(
        "canonicalize", SCRIPTS / "canonicalize.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


# --- detail selection -------------------------------------------------------

def test_detail_full_has_all_sections():
    assert DetailConfig.full().selected == frozenset(SECTION_ORDER)
    assert len(SECTION_ORDER) == 14


def test_detail_normalization_forces_model_details():
    cfg = DetailConfig.of(["surveys", "datasets"])
    assert cfg.selected == frozenset({"model_details", "surveys", "datasets"})


def test_detail_accepts_enum_members():
    cfg = DetailConfig.of([SectionKind.AUDIT])
    assert cfg.selected == frozenset({"model_details", "audit"})


def test_detail_rejects_unknown_section():
    with pytest.raises(ValidationFailed):
        DetailConfig.of(["model_details", "blooper_reel"])


def test_detail_rejects_empty_selection():
    with pytest.raises(EmptyDetail):
        DetailConfig.of([])


# --- compilation against the seeded corpus ----------------------------------

@pytest.fixture
def full_doc(seeded_store):
    return compile_document(seeded_store, "deployment_maggic",
                            DetailConfig.full(), actor="qa")


def test_sections_complete_and_ordered(full_doc):
    assert [s["kind"] for s in full_doc["sections"]] == SECTION_ORDER


def test_model_details_content(full_doc):
    md = full_doc["sections"][0]["content"]
    assert md["modelName"] == "MAGGIC-MLP Model (v1.0)"
    assert md["modelVersion"] == "1.0"
    assert md["productIdentifier"] == "AI4HF_MAGGIC_MLP_001"
    assert md["trlLevel"] == "TRL6"


def test_deployment_and_environment_content(full_doc):
    by_kind = {s["kind"]: s["content"] for s in full_doc["sections"]}
    assert by_kind["deployment_details"]["deploymentStatus"] == "VALIDATING"
    assert by_kind["deployment_details"]["deploymentTags"] == [
        "Validation", "ProductionCandidate"]


def test_learning_process_stage_split(full_doc):
    by_kind = {s["kind"]: s["content"] for s in full_doc["sections"]}
    stages = by_kind["learning_process"]["stages"]
    split = {s["stageType"]: s["datasetPercentage"] for s in stages}
    assert split == {"training": 70, "validation": 15, "testing": 15}


def test_dataset_record_count(full_doc):
    by_kind = {s["kind"]: s["content"] for s in full_doc["sections"]}
    assert by_kind["datasets"]["datasets"][0]["numOfRecords"] == 500


def test_evaluation_measures_content(full_doc):
    by_kind = {s["kind"]: s["content"] for s in full_doc["sections"]}
    values = {m["name"]: m["value"]
              for m in by_kind["evaluation_measures"]["measures"]}
    assert values["AUC"] == "0.89"
    assert values["Accuracy"] == "0.83"
    assert values["F1-Score"] == "0.81"


def test_feature_rows(full_doc):
    by_kind = {s["kind"]: s["content"] for s in full_doc["sections"]}
    rows = {f["title"]: f for f in by_kind["feature_sets"]["features"]}
    assert rows["age"]["dataType"] == "integer"
    assert rows["age"]["units"] == "years"
    assert rows["systolic_blood_pressure"]["dataType"] == "decimal"
    assert rows["systolic_blood_pressure"]["units"] == "mmHg"
    assert len(rows) == 13


def test_source_versions_cover_every_aggregated_entity(full_doc, seeded_store):
    for eid, version in full_doc["sourceVersions"].items():
        assert seeded_store.get(eid).version == version
    # spot-check the far corners of the graph
    for eid in ("initial_study", "deployment_maggic", "feat_age",
                "survey_ethics", "figure_roc_curve", "param_hidden_layers"):
        assert eid in full_doc["sourceVersions"]


def test_audit_section_restricted_to_sources(full_doc):
    by_kind = {s["kind"]: s["content"] for s in full_doc["sections"]}
    ids = {e["entityId"] for e in by_kind["audit"]["entries"]}
    assert ids == set(full_doc["sourceVersions"])


# --- apply_detail properties ------------------------------------------------

section_sets = st.sets(st.sampled_from(SECTION_ORDER), min_size=1)


@given(selection=section_sets)
@settings(max_examples=30, deadline=None)
def test_apply_detail_is_a_subsequence(selection):
    doc = {"passportId": "p", "sections": [
        {"kind": k, "content": {"k": k}} for k in SECTION_ORDER]}
    out = apply_detail(doc, DetailConfig.of(selection))
    kinds = [s["kind"] for s in out["sections"]]
    assert kinds == [k for k in SECTION_ORDER
                     if k in (set(selection) | {"model_details"})]
    assert doc["sections"][0]["kind"] == "model_details"  # input untouched


@given(small=section_sets, extra=section_sets)
@settings(max_examples=30, deadline=None)
def test_apply_detail_is_monotone(small, extra):
    doc = {"passportId": "p", "sections": [
        {"kind": k, "content": {}} for k in SECTION_ORDER]}
    narrow = apply_detail(doc, DetailConfig.of(small))
    wide = apply_detail(doc, DetailConfig.of(small | extra))
    narrow_kinds = {s["kind"] for s in narrow["sections"]}
    wide_kinds = {s["kind"] for s in wide["sections"]}
    assert narrow_kinds <= wide_kinds


def test_compile_with_detail_equals_filter_of_full(seeded_store):
    detail = DetailConfig.of(["study_details", "evaluation_measures"])
    direct = compile_document(seeded_store, "deployment_maggic", detail,
                              actor="qa", passport_id="fixed",
                              clock=lambda: "T0")
    full = compile_document(seeded_store, "deployment_maggic",
                            DetailConfig.full(), actor="qa",
                            passport_id="fixed", clock=lambda: "T0")
    assert direct == apply_detail(full, detail)


# --- canonical form ---------------------------------------------------------

def test_canonical_bytes_key_order_independent():
    a = {"b": [1, 2], "a": {"y": True, "x": None}}
    b = {"a": {"x": None, "y": True}, "b": [1, 2]}
    assert canonical_bytes(a) == canonical_bytes(b)
    assert canonical_bytes(a) == b'{"a":{"x":null,"y":true},"b":[1,2]}'


def test_canonical_bytes_match_independent_writer(full_doc):
    alt = _load_canonicalizer()
    assert canonical_bytes(full_doc) == alt.canonical(full_doc)


@given(st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6)
    | st.floats(allow_nan=False, allow_infinity=False, width=32)
    | st.text(max_size=20),
    lambda inner: st.lists(inner, max_size=4)
    | st.dictionaries(st.text(max_size=8), inner, max_size=4),
    max_leaves=20))
@settings(max_examples=80, deadline=None)
def test_canonical_writers_agree_on_arbitrary_documents(doc):
    alt = _load_canonicalizer()
    assert canonical_bytes(doc) == alt.canonical(doc)


def test_golden_digest(tmp_path, monkeypatch):
    """Digest of the fully deterministic compile, frozen on disk and
    recomputed here through the independent canonicalizer."""
    counter = itertools.count(1)
    monkeypatch.setattr(store_mod, "new_id", lambda: f"gid{next(counter):06d}")
    monkeypatch.setattr(pp, "new_id", store_mod.new_id)
    ticks = itertools.count(0)

    def clock():
        t = next(ticks)
        return f"2026-01-01T00:{t // 60:02d}:{t % 60:02d}Z"

    store = RegistryStore(str(tmp_path / "g.db"), clock=clock)
    from passport_registry.seeding import seed_fixture
    seed_fixture(store, FIXTURE_PATH)
    doc = compile_document(store, "deployment_maggic", DetailConfig.full(),
                           actor="quality_assurance_specialist",
                           passport_id="golden_passport",
                           clock=lambda: "2026-01-01T01:00:00Z")
    store.close()
    alt = _load_canonicalizer()
    digest = alt.digest_of(doc)
    import hashlib
    assert hashlib.sha256(canonical_bytes(doc)).hexdigest() == digest
    frozen = (DATA / "golden_digest.txt").read_text().strip()
    assert digest == frozen


# --- persistence ------------------------------------------------------------

def test_create_passport_id_matches_document(seeded_store):
    ent = create_passport(seeded_store, "deployment_maggic",
                          DetailConfig.full(), actor="qa")
    assert ent.body["document"]["passportId"] == ent.id
    assert ent.version == 1
    assert ent.studyId == "initial_study"


def test_recompile_reflects_updates(seeded_store):
    ent = create_passport(seeded_store, "deployment_maggic",
                          DetailConfig.full(), actor="qa")
    model = seeded_store.get("model_maggic_mlp")
    seeded_store.update("model_maggic_mlp", {**model.body, "trlLevel": "TRL7"},
                        expected_version=1, actor="ds")
    fresh = recompile_passport(seeded_store, ent.id, DetailConfig.full(),
                               actor="qa")
    assert fresh.version == 2
    md = fresh.body["document"]["sections"][0]["content"]
    assert md["trlLevel"] == "TRL7"
    assert fresh.body["document"]["sourceVersions"]["model_maggic_mlp"] == 2


# --- signing ----------------------------------------------------------------

def test_sign_verify_round_trip():
    signer = PassportSigner.generate()
    doc = {"passportId": "p", "sections": []}
    env = signer.sign_document(doc)
    assert env.algorithmLabel == "Ed25519"
    assert signer.verify_document(doc, env)


def test_verify_rejects_tampered_document():
    signer = PassportSigner.generate()
    doc = {"passportId": "p", "value": 1}
    env = signer.sign_document(doc)
    assert not signer.verify_document({"passportId": "p", "value": 2}, env)


def test_verify_rejects_wrong_key():
    doc = {"passportId": "p"}
    env = PassportSigner.generate().sign_document(doc)
    assert not PassportSigner.generate().verify_document(doc, env)


def test_signature_fuzz():
    signer = PassportSigner.generate()
    payload = canonical_bytes({"passportId": "p", "n": 42})
    env = sign(payload, signer.private_key)
    rng = random.Random(7)
    import base64
    raw = bytearray(base64.b64decode(env.signature))
    for _ in range(50):
        pos = rng.randrange(len(raw))
        mutated = bytearray(raw)
        mutated[pos] ^= 1 << rng.randrange(8)
        bad = pp.SignatureEnvelope(
            digest=env.digest,
            signature=base64.b64encode(bytes(mutated)).decode(),
            keyId=env.keyId)
        assert not verify(payload, bad, signer.public_key)


def test_load_or_create_round_trips_key(tmp_path):
    path = str(tmp_path / "key.pem")
    first = PassportSigner.load_or_create(path)
    second = PassportSigner.load_or_create(path)
    assert first.public_pem() == second.public_pem()


# --- report -----------------------------------------------------------------

def test_report_contains_fixture_values(full_doc):
    report = render_report(full_doc)
    assert "# AI Product Passport: MAGGIC-MLP Model (v1.0)" in report
    assert "| TRL Level | TRL6 |" in report
    assert "70%" in report and "15%" in report
    assert "| AUC |" in report or "| AUC " in report
    headings = [l for l in report.splitlines() if l.startswith("## ")]
    assert len(headings) == len(SECTION_ORDER)


def test_report_blank_values_render_na(seeded_store):
    detail = DetailConfig.of(["model_details"])
    doc = compile_document(seeded_store, "deployment_maggic", detail, actor="qa")
    doc["sections"][0]["content"]["license"] = ""
    report = render_report(doc)
    assert "| License | N/A |" in report


def test_report_sections_follow_selection(seeded_store):
    detail = DetailConfig.of(["surveys", "study_details"])
    doc = compile_document(seeded_store, "deployment_maggic", detail, actor="qa")
    report = render_report(doc)
    headings = [l for l in report.splitlines() if l.startswith("## ")]
    assert headings == ["## Model Details", "## Study Details", "## Surveys"]

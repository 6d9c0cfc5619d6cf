from __future__ import annotations

import os
from importlib import resources

import pytest
from fastapi.testclient import TestClient

from passport_registry.api import create_app
from passport_registry.config import AppConfig
from passport_registry.seeding import seed_fixture
from passport_registry.store import RegistryStore

FIXTURE_PATH = str(resources.files("passport_registry").joinpath("fixtures/maggic.json"))


@pytest.fixture
def store(tmp_path):
    s = RegistryStore(str(tmp_path / "registry.db"))
    yield s
    s.close()


@pytest.fixture
def seeded_store(store):
    seed_fixture(store, FIXTURE_PATH)
    return store


@pytest.fixture
def app_config(tmp_path):
    return AppConfig(
        db_path=str(tmp_path / "registry.db"),
        token_secret_path=str(tmp_path / "token.secret"),
        signing_key_path=str(tmp_path / "signing_key.pem"),
        accounts_path=FIXTURE_PATH,
    )


@pytest.fixture
def client(app_config):
    s = RegistryStore(app_config.db_path)
    seed_fixture(s, FIXTURE_PATH)
    s.close()
    app = create_app(app_config)
    with TestClient(app) as c:
        yield c
    app.state.store.close()


BASE = "/passport/api"


def login(client, username: str) -> dict:
    r = client.post(f"{BASE}/auth/login",
                    json={"username": username, "password": username})
    assert r.status_code == 200, r.text
    return {"Authorization": "Bearer " + r.json()["token"]}

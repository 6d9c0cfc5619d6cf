"""HTTP client for submitting training results to the passport registry.

The client authenticates once on connect and holds a bearer token. Any call
that comes back 401 refreshes the token with the stored credentials and
retries exactly once; a second 401 surfaces as RetryExhausted. Credentials
are kept only in memory and never appear in logs or exception messages.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import requests


class ConnectionFailed(Exception):
    pass


class BadCredentials(Exception):
    pass


class RetryExhausted(Exception):
    """The request failed with 401 even after a token refresh."""


class RequestFailed(Exception):
    def __init__(self, status: int, code: str, message: str, details=None):
        super().__init__(f"{status} {code}: {message}")
        self.status = status
        self.code = code
        self.details = details


@dataclass
class ClientConfig:
    passport_server_url: str = ""
    study_id: str = ""
    experiment_id: str = ""
    organization_id: str = ""
    username: str = ""
    password: str = field(default="", repr=False)

    @staticmethod
    def from_env(**overrides) -> "ClientConfig":
        cfg = ClientConfig(
            passport_server_url=os.environ.get("PASSPORT_SERVER_URL", ""),
            study_id=os.environ.get("PASSPORT_STUDY_ID", ""),
            experiment_id=os.environ.get("PASSPORT_EXPERIMENT_ID", ""),
            organization_id=os.environ.get("PASSPORT_ORGANIZATION_ID", ""),
            username=os.environ.get("PASSPORT_USERNAME", ""),
            password=os.environ.get("PASSPORT_PASSWORD", ""),
        )
        for key, value in overrides.items():
            setattr(cfg, key, value)
        return cfg


class PassportClient:
    def __init__(self, config: ClientConfig, session: requests.Session | None = None):
        self.config = config
        self._base = config.passport_server_url.rstrip("/")
        self._http = session or requests.Session()
        self._token = ""
        self.refresh_token()

    # -- authentication ------------------------------------------------------

    def refresh_token(self) -> None:
        try:
            r = self._http.post(f"{self._base}/auth/login", json={
                "username": self.config.username,
                "password": self.config.password,
            }, timeout=30)
        except requests.ConnectionError as exc:
            raise ConnectionFailed(f"cannot reach {self._base}") from exc
        if r.status_code == 401:
            raise BadCredentials("invalid username or password")
        r.raise_for_status()
        self._token = r.json()["token"]

    def _request(self, method: str, path: str, *, json_body=None,
                 _retried: bool = False) -> requests.Response:
        try:
            r = self._http.request(
                method, f"{self._base}{path}", json=json_body,
                headers={"Authorization": f"Bearer {self._token}"}, timeout=30)
        except requests.ConnectionError as exc:
            raise ConnectionFailed(f"cannot reach {self._base}") from exc
        if r.status_code == 401:
            if _retried:
                raise RetryExhausted("still unauthorized after token refresh")
            # Token expired: refresh and retry once.
            self.refresh_token()
            return self._request(method, path, json_body=json_body,
                                 _retried=True)
        if r.status_code >= 400:
            body = {}
            try:
                body = r.json()
            except ValueError:
                pass
            raise RequestFailed(r.status_code, body.get("code", "error"),
                                body.get("message", r.text),
                                body.get("details"))
        return r

    # -- API surface ---------------------------------------------------------

    def get(self, path: str) -> dict:
        return self._request("GET", path).json()

    def submit_results(self, learning_stages: list[dict],
                       evaluation_measures: list[dict],
                       model_info: dict,
                       model_artifact: dict | None = None) -> dict:
        """Push one training run's results; returns the created ids.

        model_artifact carries metadata about the trained artifact (name,
        type, content hash); weights themselves are never uploaded. It is
        recorded as parameter entries attached to the created model.
        """
        body = {
            "modelInfo": dict(model_info),
            "learningStages": list(learning_stages),
            "evaluationMeasures": list(evaluation_measures),
        }
        path = (f"/studies/{self.config.study_id}"
                f"/experiments/{self.config.experiment_id}/results")
        result = self._request("POST", path, json_body=body).json()
        if model_artifact:
            parameter_ids = []
            for key, value in model_artifact.items():
                r = self._request(
                    "POST", f"/studies/{self.config.study_id}/parameters",
                    json_body={"name": f"artifact_{key}",
                               "dataType": "string", "value": str(value),
                               "targetKind": "model",
                               "targetId": result["modelId"]})
                parameter_ids.append(r.json()["id"])
            result["artifactParameterIds"] = parameter_ids
        return result


def connect(config: ClientConfig) -> PassportClient:
    return PassportClient(config)

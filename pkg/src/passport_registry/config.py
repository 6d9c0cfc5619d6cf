"""Runtime configuration: JSON file plus environment-variable overrides."""

from __future__ import annotations

import json
import os
import secrets
from dataclasses import dataclass, field, fields
from pathlib import Path

ENV_PREFIX = "PASSPORT_"


@dataclass
class AppConfig:
    db_path: str = "passport.db"
    base_path: str = "/passport/api"
    host: str = "127.0.0.1"
    port: int = 8080
    token_lifetime_seconds: int = 900
    token_secret_path: str = "token.secret"
    signing_key_path: str = "signing_key.pem"
    accounts_path: str = ""  # JSON file with an "accounts" list; optional

    @staticmethod
    def load(config_path: str | None = None,
             env: dict[str, str] | None = None) -> "AppConfig":
        env = os.environ if env is None else env
        cfg = AppConfig()
        if config_path:
            data = json.loads(Path(config_path).read_text())
            for f in fields(cfg):
                if f.name in data:
                    setattr(cfg, f.name, data[f.name])
        for f in fields(cfg):
            key = ENV_PREFIX + f.name.upper()
            if key in env:
                value: object = env[key]
                if f.type == "int":
                    value = int(value)  # type: ignore[arg-type]
                setattr(cfg, f.name, value)
        return cfg

    def token_secret(self) -> bytes:
        """Shared HMAC secret, created on first use and persisted so the CLI
        and the server agree across processes."""
        path = Path(self.token_secret_path)
        if path.exists():
            return bytes.fromhex(path.read_text().strip())
        secret = secrets.token_bytes(32)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(secret.hex())
        return secret

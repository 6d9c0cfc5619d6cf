"""Command-line entry points: run the server, seed a fixture, export a
passport offline."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import passport as pp
from .config import AppConfig
from .seeding import seed_fixture
from .store import RegistryStore


@click.group()
@click.option("--config", "config_path", default=None,
              help="Path to a JSON configuration file.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None):
    ctx.obj = AppConfig.load(config_path)


@main.command()
@click.pass_obj
def serve(config: AppConfig):
    """Run the HTTP server."""
    import uvicorn

    from .api import create_app

    uvicorn.run(create_app(config), host=config.host, port=config.port)


@main.command()
@click.option("--fixture", required=True, type=click.Path(exists=True),
              help="Fixture JSON file to load.")
@click.pass_obj
def seed(config: AppConfig, fixture: str):
    """Load a fixture file into the registry database."""
    store = RegistryStore(config.db_path)
    try:
        count = seed_fixture(store, fixture)
    finally:
        store.close()
    click.echo(f"seeded {count} entities from {fixture}")


@main.command()
@click.option("--passport", "passport_id", required=True,
              help="Id of the passport entity to export.")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Output directory.")
@click.pass_obj
def export(config: AppConfig, passport_id: str, out_dir: str):
    """Write the canonical document, detached signature and report files."""
    store = RegistryStore(config.db_path)
    try:
        ent = store.get(passport_id)
        if ent.kind != "Passport":
            click.echo(f"{passport_id} is not a passport", err=True)
            sys.exit(1)
        doc = ent.body["document"]
        signer = pp.PassportSigner.load_or_create(config.signing_key_path)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = pp.canonical_bytes(doc)
        (out / f"{passport_id}.passport.json").write_bytes(payload)
        envelope = signer.sign_document(doc)
        (out / f"{passport_id}.passport.sig").write_text(json.dumps(
            {**envelope.to_dict(), "publicKeyPem": signer.public_pem().decode()},
            indent=2))
        (out / f"{passport_id}.report.md").write_text(pp.render_report(doc))
        click.echo(f"exported passport {passport_id} to {out}")
    finally:
        store.close()


if __name__ == "__main__":
    main()

"""Canonical JSON and content hashing for persisted artifacts."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import IntegrityError


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def content_hash(payload: dict) -> str:
    body = {k: v for k, v in payload.items() if k != "content_hash"}
    return "sha256:" + hashlib.sha256(canonical_json(body).encode()).hexdigest()


def seal(payload: dict) -> dict:
    out = dict(payload)
    out["content_hash"] = content_hash(out)
    return out


def check_seal(payload: dict) -> None:
    stored = payload.get("content_hash")
    if stored is None or stored != content_hash(payload):
        raise IntegrityError("content hash mismatch: artifact was modified or is incomplete")


def write_json(path, payload: dict) -> None:
    Path(path).write_text(canonical_json(payload))


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def expect_schema(payload: dict, schema: str) -> None:
    got = payload.get("schema")
    if got != schema:
        raise IntegrityError(f"expected schema {schema!r}, found {got!r}")

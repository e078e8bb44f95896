# app/services/storage.py
"""
Files passed between pipeline stages: pools, execution records and verdicts.

Every file is one JSON document with sorted keys and a header carrying the file kind,
the format version and a created_at timestamp. Datums in pool files are stored as
base64 canonical bytes so that reloading reproduces their ids exactly.
"""
from __future__ import annotations

import base64
import binascii
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

from app.errors import DatumFormatError, StorageError
from app.models.datum import canonical_hash, from_canonical_bytes, from_tagged_json, to_canonical_bytes, to_tagged_json
from app.models.framework import Lineage, LineageStep, MorphParams, Pool, TestCase
from app.models.records import ExecutionRecord, VerdictRecord, VerdictSummary

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
TIMESTAMP_FIELD = "created_at"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _lineage_to_json(lineage: Lineage) -> dict[str, Any]:
    return {
        "seed": lineage.seed_id,
        "steps": [
            {
                "morphism": step.morphism,
                "params": [[name, to_tagged_json(value)] for name, value in step.params.items],
                "arguments": list(step.arguments),
            }
            for step in lineage.steps
        ],
    }


def _lineage_from_json(data: dict[str, Any]) -> Lineage:
    steps = tuple(
        LineageStep(
            step["morphism"],
            MorphParams(tuple((name, from_tagged_json(value)) for name, value in step.get("params", []))),
            tuple(step.get("arguments", [])),
        )
        for step in data["steps"]
    )
    return Lineage(data["seed"], steps)


def _document(kind: str, body: dict[str, Any], created_at: str | None) -> bytes:
    document = {"kind": kind, "format_version": FORMAT_VERSION, TIMESTAMP_FIELD: created_at or _now(), **body}
    return (json.dumps(document, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _parse(data: bytes, kind: str) -> dict[str, Any]:
    try:
        document = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise StorageError(f"{kind} file is not valid JSON: {e}") from e
    if not isinstance(document, dict) or document.get("kind") != kind:
        raise StorageError(f"Expected a {kind} file, got kind {document.get('kind') if isinstance(document, dict) else None!r}")
    if document.get("format_version") != FORMAT_VERSION:
        raise StorageError(f"Unsupported {kind} file version {document.get('format_version')!r}")
    return document


def dump_pool(
    pool: Pool,
    framework: str = "",
    created_at: str | None = None,
    strategy: str = "",
    config: dict[str, Any] | None = None,
) -> bytes:
    """Serialises a pool with a header naming the framework, the strategy and the settings it ran with."""
    cases = []
    for case in pool:
        cases.append(
            {
                "id": case.id,
                "datum": base64.b64encode(to_canonical_bytes(case.datum)).decode("ascii"),
                "lineage": _lineage_to_json(case.lineage),
                "aliases": [_lineage_to_json(alias) for alias in pool.aliases(case.id)],
            }
        )
    header = {"framework": framework, "strategy": strategy, "config": config or {}, "truncated": pool.truncated}
    return _document("pool", {**header, "cases": cases}, created_at)


def load_pool(data: bytes) -> Pool:
    """
    Rebuilds a pool, checking that every stored id matches its datum.

    Raises:
        StorageError: the file is malformed or an id does not match its datum.
    """
    document = _parse(data, "pool")
    pool = Pool(truncated=bool(document.get("truncated", False)))
    try:
        for entry in document["cases"]:
            datum = from_canonical_bytes(base64.b64decode(entry["datum"], validate=True))
            if canonical_hash(datum) != entry["id"]:
                raise StorageError(f"Stored id {entry['id'][:12]} does not match its datum")
            pool.insert(TestCase(datum, _lineage_from_json(entry["lineage"])))
            for alias in entry.get("aliases", []):
                pool.add_alias(entry["id"], _lineage_from_json(alias))
    except (KeyError, TypeError, ValueError, binascii.Error, DatumFormatError) as e:
        raise StorageError(f"Malformed pool file: {e!r}") from e
    return pool


def dump_records(records: Iterable[ExecutionRecord], subject: str = "", created_at: str | None = None) -> bytes:
    return _document("records", {"subject": subject, "records": [record.to_json() for record in records]}, created_at)


def load_records(data: bytes) -> list[ExecutionRecord]:
    document = _parse(data, "records")
    entries = document.get("records")
    if not isinstance(entries, list):
        raise StorageError("Records file has no 'records' list")
    return [ExecutionRecord.from_json(entry) for entry in entries]


def dump_verdicts(verdicts: list[VerdictRecord], created_at: str | None = None) -> bytes:
    body = {
        "verdicts": [verdict.to_json() for verdict in verdicts],
        "summary": VerdictSummary.of(verdicts).to_json(),
    }
    return _document("verdicts", body, created_at)


def load_verdicts(data: bytes) -> list[VerdictRecord]:
    document = _parse(data, "verdicts")
    entries = document.get("verdicts")
    if not isinstance(entries, list):
        raise StorageError("Verdicts file has no 'verdicts' list")
    return [VerdictRecord.from_json(entry) for entry in entries]


def read_file(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        logger.error(f"Failed to read {path}: {e}")
        raise StorageError(f"Cannot read {path}: {e}") from e


def write_file(path: str | Path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as e:
        logger.error(f"Failed to write {path}: {e}")
        raise StorageError(f"Cannot write {path}: {e}") from e
    logger.info(f"Wrote {path} ({len(data)} bytes).")


def strip_timestamp(data: bytes) -> dict[str, Any]:
    """The parsed document without its creation timestamp, for replay comparisons."""
    document = json.loads(data.decode("utf-8"))
    document.pop(TIMESTAMP_FIELD, None)
    return document

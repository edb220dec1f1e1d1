"""Canonical JSON reading and writing for artifact files.

Every artifact produced by this package is a JSON document with a
``format`` tag and an integer ``version``.  Serialization is canonical
(sorted keys, no whitespace, shortest float repr) so that reruns of a
deterministic pipeline produce byte-identical files.
"""

from __future__ import annotations

import json
import os
from typing import Any

from .errors import FormatError, MissingInputError


def canonical_dumps(obj: Any) -> str:
    """Serialize to a canonical JSON string with a trailing newline."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def write_artifact(path: str, kind: str, version: int, payload: dict) -> None:
    """Write ``payload`` wrapped in a format/version envelope."""
    doc = dict(payload)
    doc["format"] = kind
    doc["version"] = version
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(canonical_dumps(doc))
    os.replace(tmp, path)


def read_artifact(path: str, kind: str, version: int) -> dict:
    """Read an artifact and check its envelope.

    Raises MissingInputError if the file does not exist and FormatError
    if it is not valid JSON or carries the wrong format tag or version.
    """
    if not os.path.exists(path):
        raise MissingInputError(f"missing input file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object at top level")
    got_kind = doc.get("format")
    if got_kind != kind:
        raise FormatError(f"{path}: expected format {kind!r}, found {got_kind!r}")
    got_version = doc.get("version")
    if got_version != version:
        raise FormatError(
            f"{path}: unsupported {kind} version {got_version!r}, expected {version}"
        )
    return doc

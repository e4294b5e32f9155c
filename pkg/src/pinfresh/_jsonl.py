"""Newline-delimited JSON helpers shared by the ingestion functions."""

from __future__ import annotations

import io
import json
import os
from contextlib import contextmanager
from typing import Iterator

from .errors import MalformedRecord


@contextmanager
def _open_source(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            yield fh
    elif isinstance(source, (bytes, bytearray)):
        yield io.StringIO(source.decode("utf-8"))
    else:
        yield source


def iter_records(source) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, object)`` for each non-blank line of ``source``.

    ``source`` may be a path, an open text file, or any iterable of lines.
    """
    with _open_source(source) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise MalformedRecord(lineno, "record is not a JSON object")
            yield lineno, obj


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def require_str(obj: dict, key: str, lineno: int) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value:
        raise MalformedRecord(lineno, f"field {key!r} must be a non-empty string")
    return value

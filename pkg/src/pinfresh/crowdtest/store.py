"""Append-only result store for execution records and assessments."""

from __future__ import annotations

import os
import threading
from typing import Iterable, Optional

from .. import _jsonl
from ..depgraph import LibraryRef
from ..errors import MalformedRecord
from ..pins import Upgrade
from .model import Assessment, ExecutionRecord, TestId, Vote, confidence, votes_from_records


def record_to_json(upgrade: Upgrade, rec: ExecutionRecord) -> dict:
    return {
        "kind": "execution",
        "upgrade": str(upgrade),
        "consumer": str(rec.test.consumer),
        "test": {"suite": rec.test.suite, "method": rec.test.method},
        "dep": str(rec.dep),
        "repetitions": [x.value for x in rec.repetitions],
    }


def record_from_json(obj: dict, lineno: int = 0) -> ExecutionRecord:
    try:
        consumer = LibraryRef.parse(obj["consumer"])
        test = TestId(consumer, obj["test"]["suite"], obj["test"]["method"])
        return ExecutionRecord(test, LibraryRef.parse(obj["dep"]), tuple(obj["repetitions"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(lineno, f"bad execution record: {exc}") from None


class ResultStore:
    """Newline-delimited store keyed by (upgrade, consumer, test, dep version).

    Records already present when the store is opened are returned by
    :meth:`lookup`, which lets an interrupted run resume without repeating
    completed executions.
    """

    def __init__(self, path):
        self.path = os.fspath(path)
        self._lock = threading.Lock()
        self._done = {}
        if os.path.exists(self.path):
            for lineno, obj in _jsonl.iter_records(self.path):
                if obj.get("kind") == "execution":
                    rec = record_from_json(obj, lineno)
                    self._done[(obj["upgrade"], rec.test, rec.dep)] = rec

    def lookup(self, upgrade: Upgrade, test: TestId, dep: LibraryRef) -> Optional[ExecutionRecord]:
        return self._done.get((str(upgrade), test, dep))

    def _append(self, objs: Iterable[dict]):
        text = "".join(_jsonl.dumps(o) + "\n" for o in objs)
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()

    def add_records(self, upgrade: Upgrade, records: Iterable[ExecutionRecord]):
        fresh = [r for r in records if (str(upgrade), r.test, r.dep) not in self._done]
        self._append(record_to_json(upgrade, r) for r in fresh)
        with self._lock:
            for r in fresh:
                self._done[(str(upgrade), r.test, r.dep)] = r

    def add_assessment(self, assessment: Assessment):
        self._append([{"kind": "assessment", **assessment.as_dict()}])


def replay(path, r: Optional[int] = None) -> list[Assessment]:
    """Rebuild every stored assessment from its persisted execution records.

    Votes and confidence are recomputed from the raw repetitions; the
    consumer set and untested reasons come from the terminal assessment
    object. When an upgrade was assessed more than once, the last
    assessment wins.
    """
    records = {}
    terminal = {}
    for lineno, obj in _jsonl.iter_records(path):
        kind = obj.get("kind")
        if kind == "execution":
            rec = record_from_json(obj, lineno)
            records.setdefault(obj["upgrade"], {})[(rec.test, rec.dep)] = rec
        elif kind == "assessment":
            terminal.pop(obj["upgrade"], None)
            terminal[obj["upgrade"]] = obj
        else:
            raise MalformedRecord(lineno, f"unknown store record kind {kind!r}")

    out = []
    for key, obj in terminal.items():
        upgrade = Upgrade.parse(key)
        recomputed = votes_from_records(records.get(key, {}).values(), upgrade, r)
        votes = {}
        for text in obj.get("votes", {}):
            consumer = LibraryRef.parse(text)
            votes[consumer] = recomputed.get(consumer, Vote.IGNORE)
        untested = {LibraryRef.parse(c): why for c, why in obj.get("untested", {}).items()}
        out.append(Assessment(upgrade, votes, confidence(votes), untested, tuple(records.get(key, {}).values())))
    return out

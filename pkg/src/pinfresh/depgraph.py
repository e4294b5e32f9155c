"""Immutable ecosystem snapshot and dependency/consumer relation queries."""

from __future__ import annotations

import logging
from collections import defaultdict, deque
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Mapping, Optional

from . import _jsonl
from .errors import (
    DanglingEdge,
    DuplicateLibrary,
    MalformedRecord,
    UnknownLibrary,
    UnparseableVersion,
)
from .versioning import Version, parse_version

logger = logging.getLogger(__name__)

__all__ = [
    "LibraryRef",
    "Snapshot",
    "ingest_snapshot",
    "export_snapshot",
    "parse_timestamp",
    "format_timestamp",
]


@dataclass(frozen=True)
class LibraryRef:
    """A library name at one concrete version, e.g. ``jackson-databind@2.10.0``.

    The version is kept as the text that appeared in the snapshot so that
    unparseable versions can still take part in the graph.
    """

    name: str
    version: str

    @property
    def parsed(self) -> Optional[Version]:
        try:
            return parse_version(self.version)
        except UnparseableVersion:
            return None

    @classmethod
    def parse(cls, text: str) -> "LibraryRef":
        name, sep, version = text.rpartition("@")
        if not sep or not name or not version:
            raise ValueError(f"expected name@version, got {text!r}")
        return cls(name, version)

    def as_dict(self) -> dict:
        return {"name": self.name, "version": self.version}

    def __str__(self):
        return f"{self.name}@{self.version}"


def ref_key(ref: LibraryRef):
    """Sort key: name, then version order; unparseable versions last."""
    parsed = ref.parsed
    if parsed is None:
        return (ref.name, 1, (), ref.version)
    return (ref.name, 0, parsed.sort_key, ref.version)


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime at second precision."""
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class Snapshot:
    """Dependency graph of resolved library versions with publish times.

    Instances are read-only after construction. Closure queries are cached
    per library.
    """

    def __init__(
        self,
        published: Mapping[LibraryRef, datetime],
        edges: Iterable[tuple[LibraryRef, LibraryRef]] = (),
    ):
        self._published = {
            ref: ts.astimezone(timezone.utc).replace(microsecond=0)
            for ref, ts in published.items()
        }
        deps = defaultdict(set)
        consumers = defaultdict(set)
        edge_set = set()
        for consumer, dep in edges:
            for end in (consumer, dep):
                if end not in self._published:
                    raise DanglingEdge(0, end)
            if consumer == dep:
                raise ValueError(f"self-dependency on {consumer}")
            edge_set.add((consumer, dep))
            deps[consumer].add(dep)
            consumers[dep].add(consumer)
        self._edges = frozenset(edge_set)
        self._deps = {k: frozenset(v) for k, v in deps.items()}
        self._consumers = {k: frozenset(v) for k, v in consumers.items()}

        by_name = defaultdict(list)
        for ref in self._published:
            by_name[ref.name].append(ref)
        self._by_name = {n: tuple(sorted(refs, key=ref_key)) for n, refs in by_name.items()}
        self.skipped = tuple(sorted((r for r in self._published if r.parsed is None), key=ref_key))
        self._closure_cache: dict = {}

    # basic accessors

    def __contains__(self, ref) -> bool:
        return ref in self._published

    def __len__(self) -> int:
        return len(self._published)

    @property
    def libraries(self) -> frozenset:
        return frozenset(self._published)

    @property
    def edges(self) -> frozenset:
        return self._edges

    def names(self) -> list[str]:
        return sorted(self._by_name)

    def versions_of(self, name: str) -> tuple[LibraryRef, ...]:
        """All snapshot entries for ``name``, in ascending version order."""
        return self._by_name.get(name, ())

    def publish(self, ref: LibraryRef) -> datetime:
        try:
            return self._published[ref]
        except KeyError:
            raise UnknownLibrary(ref) from None

    def lookup(self, name: str, version) -> Optional[LibraryRef]:
        """Find the entry for ``name`` whose version equals ``version``.

        ``version`` may be text or a :class:`Version`. Text matches the
        stored version exactly first; otherwise parsed equality is used and
        the entry rendered canonically is preferred.
        """
        candidates = self.versions_of(name)
        if isinstance(version, str):
            for ref in candidates:
                if ref.version == version:
                    return ref
            try:
                version = parse_version(version)
            except UnparseableVersion:
                return None
        matches = [ref for ref in candidates if ref.parsed == version]
        for ref in matches:
            if ref.version == str(version):
                return ref
        return matches[0] if matches else None

    # relation queries

    def _check(self, ref):
        if ref not in self._published:
            raise UnknownLibrary(ref)

    def direct_deps(self, ref: LibraryRef) -> frozenset:
        self._check(ref)
        return self._deps.get(ref, frozenset())

    def direct_consumers(self, ref: LibraryRef) -> frozenset:
        self._check(ref)
        return self._consumers.get(ref, frozenset())

    def _closure(self, ref, adjacency, tag) -> frozenset:
        self._check(ref)
        key = (tag, ref)
        cached = self._closure_cache.get(key)
        if cached is not None:
            return cached
        seen = {ref}
        queue = deque([ref])
        while queue:
            node = queue.popleft()
            for nxt in adjacency.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        seen.discard(ref)
        result = frozenset(seen)
        self._closure_cache[key] = result
        return result

    def all_deps(self, ref: LibraryRef) -> frozenset:
        return self._closure(ref, self._deps, "deps")

    def all_consumers(self, ref: LibraryRef) -> frozenset:
        return self._closure(ref, self._consumers, "consumers")

    def indirect_deps(self, ref: LibraryRef) -> frozenset:
        return self.all_deps(ref) - self.direct_deps(ref)

    def indirect_consumers(self, ref: LibraryRef) -> frozenset:
        return self.all_consumers(ref) - self.direct_consumers(ref)

    def __repr__(self):
        return f"Snapshot({len(self._published)} libraries, {len(self._edges)} edges)"


def _ref_from(obj, lineno: int) -> LibraryRef:
    if not isinstance(obj, dict):
        raise MalformedRecord(lineno, "edge endpoint must be an object with name and version")
    return LibraryRef(_jsonl.require_str(obj, "name", lineno), _jsonl.require_str(obj, "version", lineno))


def ingest_snapshot(source) -> Snapshot:
    """Load a snapshot from newline-delimited library and edge records.

    Edges may precede the libraries they reference; endpoint validation
    happens once the whole file has been read.
    """
    published = {}
    lib_lines = {}
    edges = []
    for lineno, rec in _jsonl.iter_records(source):
        kind = rec.get("type")
        if kind == "library":
            ref = LibraryRef(_jsonl.require_str(rec, "name", lineno), _jsonl.require_str(rec, "version", lineno))
            stamp = _jsonl.require_str(rec, "published", lineno)
            try:
                ts = parse_timestamp(stamp)
            except ValueError:
                raise MalformedRecord(lineno, f"bad timestamp {stamp!r}") from None
            if ref in published:
                raise DuplicateLibrary(lineno, ref)
            published[ref] = ts
            lib_lines[ref] = lineno
        elif kind == "edge":
            src = _ref_from(rec.get("from"), lineno)
            dst = _ref_from(rec.get("to"), lineno)
            if src == dst:
                raise MalformedRecord(lineno, f"self-dependency on {src}")
            edges.append((lineno, src, dst))
        else:
            raise MalformedRecord(lineno, f"unknown record type {kind!r}")

    for lineno, src, dst in edges:
        for end in (src, dst):
            if end not in published:
                raise DanglingEdge(lineno, end)
    snap = Snapshot(published, ((s, d) for _, s, d in edges))
    if snap.skipped:
        logger.info("%d libraries have unparseable versions", len(snap.skipped))
    return snap


def snapshot_records(snapshot: Snapshot) -> list[dict]:
    records = [
        {"type": "library", **ref.as_dict(), "published": format_timestamp(snapshot.publish(ref))}
        for ref in sorted(snapshot.libraries, key=ref_key)
    ]
    for src, dst in sorted(snapshot.edges, key=lambda e: (ref_key(e[0]), ref_key(e[1]))):
        records.append({"type": "edge", "from": src.as_dict(), "to": dst.as_dict()})
    return records


def export_snapshot(snapshot: Snapshot, dest) -> None:
    """Write ``snapshot`` in the same newline-delimited format ``ingest_snapshot`` reads."""
    lines = "".join(_jsonl.dumps(r) + "\n" for r in snapshot_records(snapshot))
    if hasattr(dest, "write"):
        dest.write(lines)
    else:
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(lines)

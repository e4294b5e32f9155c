"""Vulnerability advisories and the security impact of upgrades."""

from __future__ import annotations

import enum
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional

from . import _jsonl
from .depgraph import LibraryRef, Snapshot
from .errors import DuplicateAdvisoryId, MalformedRecord, UnparseableVersion
from .pins import Upgrade
from .versioning import Version, parse_version

logger = logging.getLogger(__name__)


class Severity(str, enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"
    UNKNOWN = "unknown"

    @classmethod
    def coerce(cls, value) -> "Severity":
        if isinstance(value, str):
            value = value.strip().lower()
            if value == "moderate":
                return cls.MEDIUM
            try:
                return cls(value)
            except ValueError:
                pass
        return cls.UNKNOWN


@dataclass(frozen=True)
class AffectedPackage:
    name: str
    versions: frozenset


@dataclass(frozen=True)
class Advisory:
    id: str
    severity: Severity
    affected: tuple


class AdvisoryDb:
    """Advisories indexed by ``(package name, version)``."""

    def __init__(self, advisories: Iterable[Advisory] = ()):
        self._by_id = {}
        index = defaultdict(set)
        for adv in advisories:
            if adv.id in self._by_id:
                raise DuplicateAdvisoryId(0, adv.id)
            self._by_id[adv.id] = adv
            for pkg in adv.affected:
                for v in pkg.versions:
                    index[(pkg.name, v)].add(adv.id)
        self._index = {k: frozenset(v) for k, v in index.items()}

    def __len__(self):
        return len(self._by_id)

    def __iter__(self):
        return iter(self._by_id.values())

    def __getitem__(self, advisory_id: str) -> Advisory:
        return self._by_id[advisory_id]

    def affecting(self, name: str, version: Version) -> frozenset:
        return self._index.get((name, version), frozenset())


def _versions(values, lineno: int) -> frozenset:
    if not isinstance(values, list) or not values:
        raise MalformedRecord(lineno, "affected versions must be a non-empty list")
    out = set()
    for text in values:
        try:
            out.add(parse_version(text))
        except (UnparseableVersion, TypeError):
            raise MalformedRecord(lineno, f"unparseable affected version {text!r}") from None
    return frozenset(out)


def _expand_range(name, entry, snapshot: Optional[Snapshot], lineno: int) -> frozenset:
    if snapshot is None:
        raise MalformedRecord(lineno, "range-form affected entry needs a snapshot to expand against")
    bounds = {}
    for key in ("introduced", "fixed"):
        text = entry.get(key)
        if text is None:
            continue
        try:
            bounds[key] = parse_version(text)
        except (UnparseableVersion, TypeError):
            raise MalformedRecord(lineno, f"unparseable {key} version {text!r}") from None
    lo, hi = bounds.get("introduced"), bounds.get("fixed")
    out = set()
    for ref in snapshot.versions_of(name):
        v = ref.parsed
        if v is None:
            continue
        if (lo is None or v >= lo) and (hi is None or v < hi):
            out.add(v)
    return frozenset(out)


def ingest_advisories(source, snapshot: Optional[Snapshot] = None) -> AdvisoryDb:
    """Load advisories from newline-delimited records.

    Affected entries either list versions explicitly or give an
    ``introduced``/``fixed`` range (introduced inclusive, fixed exclusive),
    which is expanded against the versions ``snapshot`` knows for that name.
    Advisories whose ranges match nothing in the snapshot are dropped.
    """
    advisories = []
    seen = set()
    for lineno, rec in _jsonl.iter_records(source):
        adv_id = _jsonl.require_str(rec, "id", lineno)
        if adv_id in seen:
            raise DuplicateAdvisoryId(lineno, adv_id)
        seen.add(adv_id)
        entries = rec.get("affected")
        if not isinstance(entries, list) or not entries:
            raise MalformedRecord(lineno, "'affected' must be a non-empty list")
        affected = []
        for entry in entries:
            if not isinstance(entry, dict):
                raise MalformedRecord(lineno, "affected entry must be an object")
            name = _jsonl.require_str(entry, "name", lineno)
            if "versions" in entry:
                versions = _versions(entry["versions"], lineno)
            elif "introduced" in entry or "fixed" in entry:
                versions = _expand_range(name, entry, snapshot, lineno)
            else:
                raise MalformedRecord(lineno, "affected entry needs 'versions' or 'introduced'/'fixed'")
            if versions:
                affected.append(AffectedPackage(name, versions))
        if not affected:
            logger.warning("advisory %s affects no known versions; dropped", adv_id)
            continue
        advisories.append(Advisory(adv_id, Severity.coerce(rec.get("severity")), tuple(affected)))
    return AdvisoryDb(advisories)


def vulns_of(db: AdvisoryDb, lib: LibraryRef) -> frozenset:
    """Ids of advisories affecting ``lib``; empty for unparseable versions."""
    v = lib.parsed
    if v is None:
        return frozenset()
    return db.affecting(lib.name, v)


@dataclass(frozen=True)
class SecurityDelta:
    upgrade: Upgrade
    before: frozenset
    after: frozenset
    delta: int


def security_delta(db: AdvisoryDb, u: Upgrade) -> SecurityDelta:
    before = db.affecting(u.dep_name, u.from_version)
    after = db.affecting(u.dep_name, u.to_version)
    return SecurityDelta(u, before, after, len(after) - len(before))


@dataclass(frozen=True)
class ImpactReport:
    reduced_count: int
    increased_count: int
    unchanged_count: int
    reduce_to_increase_ratio: Optional[float]
    total_delta: int
    fixed_by_severity: dict

    def as_dict(self) -> dict:
        return {
            "reduced_count": self.reduced_count,
            "increased_count": self.increased_count,
            "unchanged_count": self.unchanged_count,
            "reduce_to_increase_ratio": self.reduce_to_increase_ratio,
            "total_delta": self.total_delta,
            "fixed_by_severity": dict(self.fixed_by_severity),
        }


def impact_report(db: AdvisoryDb, upgrades: Iterable[Upgrade]) -> ImpactReport:
    """Categorise upgrades by the sign of their security delta.

    The ratio is ``None`` when no upgrade increases the advisory count.
    ``fixed_by_severity`` tallies advisories removed by reducing upgrades.
    """
    reduced = increased = unchanged = total = 0
    fixed = Counter()
    for u in set(upgrades):
        d = security_delta(db, u)
        total += d.delta
        if d.delta < 0:
            reduced += 1
            for adv_id in d.before - d.after:
                fixed[db[adv_id].severity.value] += 1
        elif d.delta > 0:
            increased += 1
        else:
            unchanged += 1
    ratio = reduced / increased if increased else None
    return ImpactReport(reduced, increased, unchanged, ratio, total, dict(sorted(fixed.items())))

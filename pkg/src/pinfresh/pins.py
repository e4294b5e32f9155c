"""Stale and fresh pin detection, pin age, and anchor-based pin datasets.

A consumer ``C`` *stale-pins* a dependency ``D@a`` when a same-major newer
version ``D@b`` was published after ``D@a`` but before ``C`` itself. When
no such version exists (and ``D@a`` predates ``C``), the pin is fresh.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

from . import _jsonl
from .depgraph import LibraryRef, Snapshot, ref_key
from .errors import EmptySnapshot, InvalidUpgrade, NotADependency, UnknownLibrary
from .versioning import Version, is_semver_compatible, parse_version

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400


class PinKind(str, enum.Enum):
    DIRECT = "direct"
    INDIRECT = "indirect"


@dataclass(frozen=True)
class StalePin:
    consumer: LibraryRef
    pinned: LibraryRef
    upgrade_target: LibraryRef
    kind: PinKind

    @property
    def upgrade(self) -> "Upgrade":
        return Upgrade(self.pinned.name, self.pinned.parsed, self.upgrade_target.parsed)

    def as_record(self) -> dict:
        return {
            "consumer": str(self.consumer),
            "pinned": str(self.pinned),
            "target": str(self.upgrade_target),
            "kind": self.kind.value,
        }


@dataclass(frozen=True)
class FreshPin:
    consumer: LibraryRef
    dep: LibraryRef
    kind: PinKind


@dataclass(frozen=True)
class Upgrade:
    """Moving dependency ``dep_name`` from ``from_version`` to ``to_version``.

    Construction does not enforce semver compatibility so that reversed
    pairs can be expressed; call :meth:`check` where it matters.
    """

    dep_name: str
    from_version: Version
    to_version: Version

    @classmethod
    def parse(cls, text: str) -> "Upgrade":
        """Parse ``name:from:to``. The name itself may contain colons."""
        parts = text.rsplit(":", 2)
        if len(parts) != 3 or not all(parts):
            raise ValueError(f"expected name:from:to, got {text!r}")
        return cls(parts[0], parse_version(parts[1]), parse_version(parts[2]))

    @property
    def is_valid(self) -> bool:
        return is_semver_compatible(self.from_version, self.to_version)

    def check(self) -> "Upgrade":
        if not self.is_valid:
            raise InvalidUpgrade(f"{self} is not a semver-compatible upgrade")
        return self

    @property
    def sort_key(self):
        return (self.dep_name, self.from_version.sort_key, self.to_version.sort_key)

    def reversed(self) -> "Upgrade":
        return Upgrade(self.dep_name, self.to_version, self.from_version)

    def __str__(self):
        return f"{self.dep_name}:{self.from_version}:{self.to_version}"


@dataclass(frozen=True)
class PinAge:
    staleness_days: int
    versions_behind: int


def _kind(s: Snapshot, consumer: LibraryRef, dep: LibraryRef) -> PinKind:
    return PinKind.DIRECT if dep in s.direct_deps(consumer) else PinKind.INDIRECT


def upgrade_candidates(s: Snapshot, consumer: LibraryRef, dep: LibraryRef) -> list[LibraryRef]:
    """Same-major newer versions of ``dep`` published strictly between ``dep`` and ``consumer``."""
    current = dep.parsed
    if current is None:
        return []
    lo, hi = s.publish(dep), s.publish(consumer)
    out = []
    for ref in s.versions_of(dep.name):
        v = ref.parsed
        if v is None or v.major != current.major or not v > current:
            continue
        if lo < s.publish(ref) < hi:
            out.append(ref)
    return out


def classify_pin(s: Snapshot, consumer: LibraryRef, dep: LibraryRef) -> Union[StalePin, FreshPin, None]:
    """Classify the dependency of ``consumer`` on ``dep``.

    Returns a :class:`StalePin` targeting the highest qualifying version, a
    :class:`FreshPin`, or ``None`` when the pair is not pin-relevant (the
    dependency's version is unparseable, or it was not published before the
    consumer).
    """
    if dep not in s:
        raise UnknownLibrary(dep)
    if dep not in s.all_deps(consumer):
        raise NotADependency(f"{dep} is not a dependency of {consumer}")
    if dep.parsed is None or not s.publish(dep) < s.publish(consumer):
        return None
    kind = _kind(s, consumer, dep)
    candidates = upgrade_candidates(s, consumer, dep)
    if candidates:
        return StalePin(consumer, dep, max(candidates, key=ref_key), kind)
    return FreshPin(consumer, dep, kind)


def _classify_all(s: Snapshot, consumer: LibraryRef, cls):
    out = []
    for dep in sorted(s.all_deps(consumer), key=ref_key):
        pin = classify_pin(s, consumer, dep)
        if isinstance(pin, cls):
            out.append(pin)
    return out


def find_stale_pins(s: Snapshot, consumer: LibraryRef) -> list[StalePin]:
    """Every stale pin of ``consumer``, ordered by dependency name and version."""
    return _classify_all(s, consumer, StalePin)


def find_fresh_pins(s: Snapshot, consumer: LibraryRef) -> list[FreshPin]:
    return _classify_all(s, consumer, FreshPin)


def pin_age(s: Snapshot, pin: StalePin, relative_to: str = "target") -> PinAge:
    """How outdated a stale pin is.

    ``staleness_days`` is the publish gap from the pinned version to the
    upgrade target, rounded up to whole days. Pass ``relative_to="consumer"``
    to measure up to the consumer's publish time instead.

    ``versions_behind`` counts distinct same-major versions above the pinned
    one, up to and including the target, published before the consumer.
    """
    if relative_to == "target":
        end = s.publish(pin.upgrade_target)
    elif relative_to == "consumer":
        end = s.publish(pin.consumer)
    else:
        raise ValueError(f"relative_to must be 'target' or 'consumer', not {relative_to!r}")
    gap = (end - s.publish(pin.pinned)).total_seconds()
    days = math.ceil(gap / SECONDS_PER_DAY)

    pinned, target = pin.pinned.parsed, pin.upgrade_target.parsed
    cutoff = s.publish(pin.consumer)
    behind = set()
    for ref in s.versions_of(pin.pinned.name):
        v = ref.parsed
        if v is not None and v.major == pinned.major and pinned < v <= target and s.publish(ref) < cutoff:
            behind.add(v)
    return PinAge(days, len(behind))


@dataclass(frozen=True)
class DependencyPair:
    consumer: LibraryRef
    dep: LibraryRef
    kind: PinKind


@dataclass(frozen=True)
class PinDataset:
    """Result of anchor-based dataset construction."""

    anchors: tuple[str, ...] = ()
    consumers: tuple[LibraryRef, ...] = ()
    pairs: tuple[DependencyPair, ...] = ()
    pins: tuple[StalePin, ...] = ()
    upgrades: tuple[Upgrade, ...] = field(default=())

    def pins_of(self, kind: Optional[PinKind] = None) -> list[StalePin]:
        return [p for p in self.pins if kind is None or p.kind == kind]

    def upgrades_of(self, kind: Optional[PinKind] = None) -> list[Upgrade]:
        return sorted({p.upgrade for p in self.pins_of(kind)}, key=lambda u: u.sort_key)

    def consumers_of(self, upgrade: Upgrade, kind: Optional[PinKind] = None) -> set[LibraryRef]:
        return {p.consumer for p in self.pins_of(kind) if p.upgrade == upgrade}


def anchor_popularity(s: Snapshot) -> dict[str, int]:
    """Distinct consumers of each library name, pooled over all its versions."""
    popularity = {}
    for name in s.names():
        pooled = set()
        for ref in s.versions_of(name):
            pooled |= s.all_consumers(ref)
        popularity[name] = len(pooled)
    return popularity


def select_anchors(s: Snapshot, anchor_count: int) -> list[str]:
    popularity = anchor_popularity(s)
    ranked = sorted(popularity, key=lambda n: (-popularity[n], n))
    return ranked[:anchor_count]


def latest_per_name(refs, strict: bool = True) -> list[LibraryRef]:
    """Keep the highest version of each library name.

    With ``strict`` set, unparseable versions are never chosen. Otherwise
    they are used only for names that have no parseable version at all.
    """
    best = {}
    for ref in refs:
        cur = best.get(ref.name)
        if ref.parsed is None:
            if strict:
                logger.debug("skipping consumer with unparseable version %s", ref)
            elif cur is None or (cur.parsed is None and ref.version > cur.version):
                best[ref.name] = ref
            continue
        if cur is None or cur.parsed is None or ref_key(ref) > ref_key(cur):
            best[ref.name] = ref
    return sorted(best.values(), key=ref_key)


def build_pin_dataset(s: Snapshot, anchor_count: int) -> PinDataset:
    """Build the stale-pin dataset seeded by the ``anchor_count`` most popular names.

    1. Rank names by distinct consumers across all versions; the top ones are anchors.
    2. Pool the consumers of every anchor version and keep the highest
       version of each consumer name.
    3. For each kept consumer, record its dependencies on anchors and the
       stale pins among them.
    """
    if len(s) == 0:
        raise EmptySnapshot("snapshot has no libraries")
    names = s.names()
    if not 1 <= anchor_count <= len(names):
        raise ValueError(f"anchor_count must be in [1, {len(names)}], got {anchor_count}")

    anchors = select_anchors(s, anchor_count)
    anchor_set = set(anchors)
    pooled = set()
    for name in anchors:
        for ref in s.versions_of(name):
            pooled |= s.all_consumers(ref)
    consumers = latest_per_name(pooled)

    pairs, pins = [], []
    for consumer in consumers:
        for dep in sorted(s.all_deps(consumer), key=ref_key):
            if dep.name not in anchor_set:
                continue
            pairs.append(DependencyPair(consumer, dep, _kind(s, consumer, dep)))
            pin = classify_pin(s, consumer, dep)
            if isinstance(pin, StalePin):
                pins.append(pin)
    upgrades = sorted({p.upgrade for p in pins}, key=lambda u: u.sort_key)
    return PinDataset(tuple(anchors), tuple(consumers), tuple(pairs), tuple(pins), tuple(upgrades))


def _pct(part: int, whole: int) -> float:
    return round(100.0 * part / whole, 4) if whole else 0.0


def dataset_stats(d: PinDataset) -> dict:
    """Pinning statistics per pin kind plus overall totals."""
    stats = {}
    for kind in PinKind:
        pairs = [p for p in d.pairs if p.kind == kind]
        pins = d.pins_of(kind)
        consumers = {p.consumer for p in pairs}
        stale_consumers = {p.consumer for p in pins}
        stats[kind.value] = {
            "consumers": len(consumers),
            "stale_consumers": len(stale_consumers),
            "stale_consumer_pct": _pct(len(stale_consumers), len(consumers)),
            "deps": len(pairs),
            "stale_pins": len(pins),
            "upgrades": len({p.upgrade for p in pins}),
        }
    stale_consumers = {p.consumer for p in d.pins}
    stats["total"] = {
        "anchors": len(d.anchors),
        "consumers": len(d.consumers),
        "stale_consumers": len(stale_consumers),
        "stale_consumer_pct": _pct(len(stale_consumers), len(d.consumers)),
        "deps": len(d.pairs),
        "stale_pins": len(d.pins),
        "upgrades": len(d.upgrades),
    }
    return stats


CSV_COLUMNS = ("consumer", "pinned", "target", "kind")


def dataset_jsonl(d: PinDataset) -> str:
    lines = [_jsonl.dumps(p.as_record()) for p in d.pins]
    lines.append(_jsonl.dumps({"summary": dataset_stats(d)}))
    return "".join(line + "\n" for line in lines)


def dataset_csv(d: PinDataset) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for p in d.pins:
        writer.writerow(p.as_record())
    return buf.getvalue()

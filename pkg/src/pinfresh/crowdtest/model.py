"""Test outcomes, consumer votes and the confidence score."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional

from ..depgraph import LibraryRef
from ..errors import WrongRepetitionCount
from ..pins import Upgrade

logger = logging.getLogger(__name__)

DEFAULT_REPETITIONS = 5


class OutcomeClass(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    FLAKY = "flaky"


class Vote(str, enum.Enum):
    SAFE = "safe"
    UNSAFE = "unsafe"
    IGNORE = "ignore"


@dataclass(frozen=True)
class TestId:
    __test__ = False  # keep pytest from collecting this class

    consumer: LibraryRef
    suite: str
    method: str

    @property
    def sort_key(self):
        return (self.consumer.name, self.consumer.version, self.suite, self.method)

    def __str__(self):
        return f"{self.suite}#{self.method}"


@dataclass(frozen=True)
class ExecutionRecord:
    """Outcomes of ``r`` consecutive runs of one test against one dependency version."""

    test: TestId
    dep: LibraryRef
    repetitions: tuple

    def __post_init__(self):
        reps = tuple(OutcomeClass(x) for x in self.repetitions)
        if any(x is OutcomeClass.FLAKY for x in reps):
            raise ValueError("a single repetition is either pass or fail")
        object.__setattr__(self, "repetitions", reps)


def classify_outcome(rec: ExecutionRecord, r: Optional[int] = None) -> OutcomeClass:
    """pass if every repetition passed, fail if every one failed, flaky otherwise."""
    n = len(rec.repetitions)
    if n == 0 or (r is not None and n != r):
        raise WrongRepetitionCount(f"{rec.test}: expected {r if r is not None else '>= 1'} repetitions, got {n}")
    if all(x is OutcomeClass.PASS for x in rec.repetitions):
        return OutcomeClass.PASS
    if all(x is OutcomeClass.FAIL for x in rec.repetitions):
        return OutcomeClass.FAIL
    return OutcomeClass.FLAKY


def vote(
    outcomes_old: Mapping[TestId, OutcomeClass],
    outcomes_new: Mapping[TestId, OutcomeClass],
    consumer=None,
) -> Vote:
    """A consumer's verdict on an upgrade, from per-test outcomes at both versions.

    unsafe: some test passes at the old version and fails at the new one.
    safe: at least one test passes at the old version and all such tests
    still pass at the new one. Everything else is ignore, including suites
    where nothing passes consistently at the old version.
    """
    shared = outcomes_old.keys() & outcomes_new.keys()
    dropped = (outcomes_old.keys() | outcomes_new.keys()) - shared
    if dropped:
        logger.info("%s: dropping %d tests not run at both versions", consumer, len(dropped))

    baseline = [t for t in shared if outcomes_old[t] is OutcomeClass.PASS]
    if any(outcomes_new[t] is OutcomeClass.FAIL for t in baseline):
        return Vote.UNSAFE
    if not baseline:
        return Vote.IGNORE
    flaky_after = [t for t in baseline if outcomes_new[t] is OutcomeClass.FLAKY]
    if flaky_after:
        logger.warning("%s: %d tests went from pass to flaky; vote ignored", consumer, len(flaky_after))
        return Vote.IGNORE
    return Vote.SAFE


def confidence(votes: Mapping[object, Vote]) -> int:
    """0 if anyone votes unsafe, otherwise the number of safe votes."""
    values = list(votes.values())
    if Vote.UNSAFE in values:
        return 0
    return sum(v is Vote.SAFE for v in values)


@dataclass(frozen=True)
class Assessment:
    upgrade: Upgrade
    votes: Mapping[LibraryRef, Vote]
    confidence: int
    untested_consumers: Mapping[LibraryRef, str] = field(default_factory=dict)
    records: tuple = ()

    @property
    def status(self) -> str:
        if not self.votes:
            return "untested"
        return "positive" if self.confidence > 0 else "zero"

    def vote_counts(self) -> dict:
        counts = {v.value: 0 for v in Vote}
        for v in self.votes.values():
            counts[v.value] += 1
        return counts

    def as_dict(self) -> dict:
        return {
            "upgrade": str(self.upgrade),
            "confidence": self.confidence,
            "status": self.status,
            "votes": {str(c): v.value for c, v in sorted(self.votes.items(), key=lambda kv: str(kv[0]))},
            "vote_counts": self.vote_counts(),
            "untested": {str(c): why for c, why in sorted(self.untested_consumers.items(), key=lambda kv: str(kv[0]))},
        }

    def summary_line(self) -> str:
        c = self.vote_counts()
        return f"confidence: {self.confidence} ({c['safe']} safe / {c['unsafe']} unsafe / {c['ignore']} ignored)"


def votes_from_records(records, upgrade: Upgrade, r: Optional[int] = None) -> dict:
    """Recompute every consumer's vote from raw execution records."""
    old, new = {}, {}
    for rec in records:
        v = rec.dep.parsed
        if v == upgrade.from_version:
            side = old
        elif v == upgrade.to_version:
            side = new
        else:
            continue
        side.setdefault(rec.test.consumer, {})[rec.test] = classify_outcome(rec, r)
    consumers = old.keys() | new.keys()
    return {c: vote(old.get(c, {}), new.get(c, {}), c) for c in consumers}

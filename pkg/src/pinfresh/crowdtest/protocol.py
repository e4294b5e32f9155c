"""Crowdsourced assessment of a single upgrade and of a whole pin dataset."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from ..advisories import AdvisoryDb, security_delta
from ..depgraph import LibraryRef, Snapshot
from ..errors import ExecutorFailure, InvalidUpgrade, PinfreshError
from ..pins import PinDataset, PinKind, Upgrade, latest_per_name
from .executors import TestExecutor
from .model import (
    DEFAULT_REPETITIONS,
    Assessment,
    ExecutionRecord,
    classify_outcome,
    confidence,
    vote,
)
from .store import ResultStore

logger = logging.getLogger(__name__)

NO_TEST_ARTIFACT = "no test artifact"


def resolve_upgrade(s: Snapshot, u: Upgrade) -> tuple[LibraryRef, LibraryRef]:
    if not u.is_valid:
        raise InvalidUpgrade(f"{u} is not a semver-compatible upgrade")
    old = s.lookup(u.dep_name, u.from_version)
    new = s.lookup(u.dep_name, u.to_version)
    missing = [str(v) for v, ref in ((u.from_version, old), (u.to_version, new)) if ref is None]
    if missing:
        raise InvalidUpgrade(f"{u}: {u.dep_name} version(s) {', '.join(missing)} not in snapshot")
    return old, new


def _run_suite(executor, consumer, upgrade, old, new, r, store) -> list[ExecutionRecord]:
    tests = executor.discover(consumer)
    records = []
    for dep in (old, new):
        for test in tests:
            rec = store.lookup(upgrade, test, dep) if store is not None else None
            if rec is None or len(rec.repetitions) != r:
                reps = tuple(executor.run(test, dep, repetition=i) for i in range(r))
                rec = ExecutionRecord(test, dep, reps)
            records.append(rec)
    if store is not None:
        store.add_records(upgrade, records)
    return records


def assess_upgrade(
    s: Snapshot,
    u: Upgrade,
    executor: TestExecutor,
    r: int = DEFAULT_REPETITIONS,
    jobs: int = 1,
    store: Optional[ResultStore] = None,
) -> Assessment:
    """Run the direct consumers' test suites against both versions and score the upgrade.

    Consumers sharing a name are reduced to their highest version. Consumers
    without a test artifact, or whose suite the executor cannot run, end up
    in ``untested_consumers`` with a reason.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    old, new = resolve_upgrade(s, u)
    consumers = latest_per_name(s.direct_consumers(old), strict=False)

    untested = {}
    testable = []
    for c in consumers:
        if executor.availability(c):
            testable.append(c)
        else:
            untested[c] = NO_TEST_ARTIFACT

    def work(c):
        try:
            return c, _run_suite(executor, c, u, old, new, r, store), None
        except ExecutorFailure as exc:
            return c, None, exc.reason

    if jobs > 1 and len(testable) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, testable))
    else:
        results = [work(c) for c in testable]

    votes = {}
    all_records = []
    for c, records, failure in results:
        if failure is not None:
            logger.warning("%s: %s", c, failure)
            untested[c] = failure
            continue
        at_old = {rec.test: classify_outcome(rec, r) for rec in records if rec.dep == old}
        at_new = {rec.test: classify_outcome(rec, r) for rec in records if rec.dep == new}
        votes[c] = vote(at_old, at_new, c)
        all_records.extend(records)

    assessment = Assessment(u, votes, confidence(votes), untested, tuple(all_records))
    if store is not None:
        store.add_assessment(assessment)
    return assessment


STATUSES = ("positive", "zero", "untested", "error")


def batch_assess(
    s: Snapshot,
    dataset: PinDataset,
    db: AdvisoryDb,
    executor: TestExecutor,
    r: int = DEFAULT_REPETITIONS,
    jobs: int = 1,
    store: Optional[ResultStore] = None,
    kind: Optional[PinKind] = PinKind.DIRECT,
) -> dict:
    """Assess every vulnerability-reducing upgrade among the dataset's stale pins.

    Returns a report with one row per upgrade, the positive/zero/untested
    partition (counting both upgrades and affected consumers), and the
    number of consumers whose upgrade reaches each minimum confidence.
    Failures on one upgrade are recorded in its row and never stop the batch.
    """
    rows = []
    for u in dataset.upgrades_of(kind):
        delta = security_delta(db, u).delta
        if delta >= 0:
            continue
        n_consumers = len(dataset.consumers_of(u, kind))
        row = {"upgrade": str(u), "delta": delta, "consumers": n_consumers}
        try:
            a = assess_upgrade(s, u, executor, r=r, jobs=jobs, store=store)
        except PinfreshError as exc:
            logger.warning("assessment of %s failed: %s", u, exc)
            row.update(confidence=0, status="error", error=str(exc), tested=0, untested=0)
        else:
            row.update(
                confidence=a.confidence,
                status=a.status,
                tested=len(a.votes),
                untested=len(a.untested_consumers),
                votes=a.vote_counts(),
            )
        rows.append(row)

    partition = {k: {"upgrades": 0, "consumers": 0} for k in STATUSES + ("total",)}
    for row in rows:
        for k in (row["status"], "total"):
            partition[k]["upgrades"] += 1
            partition[k]["consumers"] += row["consumers"]

    top = max((row["confidence"] for row in rows if row["status"] == "positive"), default=0)
    thresholds = {
        str(k): sum(row["consumers"] for row in rows if row["status"] == "positive" and row["confidence"] >= k)
        for k in range(1, top + 1)
    }
    return {"rows": rows, "partition": partition, "consumers_by_min_confidence": thresholds}

"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the summary lines.
"""

import itertools
import json
import random
import time

from conftest import FIXTURES, random_graph, to_snapshot
from oracles import bfs_reachable, exhaustive_union_mean, fresh_pairs, stale_pins, vote_by_definition
from pinfresh.advisories import Advisory, AdvisoryDb, AffectedPackage, Severity, impact_report, security_delta
from pinfresh.cli import RunConfig, cmd_batch
from pinfresh.coverage import (
    CoverageReport,
    group_by_dep,
    improvement_curve,
    ingest_coverage,
    sampled_union_mean,
)
from pinfresh.crowdtest import (
    ExecutionRecord,
    OutcomeClass,
    ResultStore,
    ScriptedExecutor,
    TestId,
    assess_upgrade,
    classify_outcome,
    replay,
    vote,
)
from pinfresh.depgraph import LibraryRef, ingest_snapshot
from pinfresh.pins import FreshPin, StalePin, Upgrade, classify_pin, find_stale_pins
from pinfresh.versioning import parse_version


def verdict(n, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


def random_snapshots(count=120, seed=2024):
    rng = random.Random(seed)
    for _ in range(count):
        libs, edges = random_graph(rng, max_libs=50, max_edges=200)
        yield libs, edges, to_snapshot(libs, edges)


def test_criterion_1_pin_definitions_match_brute_force():
    start = time.perf_counter()
    mismatches = checked = 0
    for libs, edges, snap in random_snapshots():
        checked += 1
        want_stale = stale_pins(libs, edges)
        want_fresh = fresh_pairs(libs, edges)
        got_stale, got_fresh = {}, set()
        for c in snap.libraries:
            key_c = (c.name, c.version)
            for p in find_stale_pins(snap, c):
                got_stale[(key_c, (p.pinned.name, p.pinned.version))] = (p.upgrade_target.name, p.upgrade_target.version)
            for d in snap.all_deps(c):
                pin = classify_pin(snap, c, d)
                key = (key_c, (d.name, d.version))
                if isinstance(pin, StalePin):
                    if want_stale.get(key) != (pin.upgrade_target.name, pin.upgrade_target.version):
                        mismatches += 1
                elif isinstance(pin, FreshPin):
                    got_fresh.add(key)
                elif key in want_stale:
                    mismatches += 1
        mismatches += got_stale != want_stale
        mismatches += got_fresh != want_fresh
    elapsed = time.perf_counter() - start
    verdict(1, checked >= 100 and mismatches == 0 and elapsed < 30,
            f"{checked} random snapshots, {mismatches} mismatches, {elapsed:.1f}s")


def test_criterion_2_closure_matches_bfs():
    start = time.perf_counter()
    mismatches = checked = 0
    for libs, edges, snap in random_snapshots():
        checked += 1
        for c in snap.libraries:
            key = (c.name, c.version)
            deps = {(d.name, d.version) for d in snap.all_deps(c)}
            cons = {(d.name, d.version) for d in snap.all_consumers(c)}
            mismatches += deps != bfs_reachable(edges, key)
            mismatches += cons != bfs_reachable(edges, key, reverse=True)
    elapsed = time.perf_counter() - start
    verdict(2, mismatches == 0 and elapsed < 10,
            f"{checked} snapshots with cycles, {mismatches} mismatches, {elapsed:.1f}s")


def test_criterion_3_vote_truth_table():
    consumer = LibraryRef("c", "1.0")
    t = TestId(consumer, "S", "t")
    wrong = []
    for old, new in itertools.product(OutcomeClass, repeat=2):
        got = vote({t: old}, {t: new}).value
        want = vote_by_definition({"t": old.value}, {"t": new.value})
        if got != want:
            wrong.append(f"{old.value}->{new.value}")
    verdict(3, not wrong, f"9 outcome pairs, disagreements: {wrong or 'none'}")


def test_criterion_4_walkthrough_confidence():
    start = time.perf_counter()
    snap = ingest_snapshot(FIXTURES / "walkthrough_snapshot.jsonl")
    u = Upgrade.parse("jackson-databind:2.10.0:2.11.0")
    ex = ScriptedExecutor.from_file(FIXTURES / "walkthrough_script.jsonl")
    before = assess_upgrade(snap, u, ex, r=5).confidence
    flipped = LibraryRef("consumer-3", "1.0.0")
    ex.add(flipped, "RegressionTest", "roundTrip", "2.10.0", ["pass"])
    ex.add(flipped, "RegressionTest", "roundTrip", "2.11.0", ["fail"])
    after = assess_upgrade(snap, u, ex, r=5).confidence
    elapsed = time.perf_counter() - start
    verdict(4, before == 7 and after == 0 and elapsed < 5,
            f"confidence {before} with all-pass consumers, {after} after one breakage, {elapsed:.2f}s")


def test_criterion_5_outcome_classification():
    test = TestId(LibraryRef("c", "1"), "S", "t")
    dep = LibraryRef("d", "1")
    wrong = 0
    for bits in itertools.product(("pass", "fail"), repeat=5):
        got = classify_outcome(ExecutionRecord(test, dep, bits), r=5)
        want = bits[0] if len(set(bits)) == 1 else "flaky"
        wrong += got.value != want
    verdict(5, wrong == 0, f"32 repetition vectors, {wrong} misclassified")


def test_criterion_6_security_delta_properties():
    rng = random.Random(99)
    failures = 0
    for _ in range(1000):
        versions = sorted({f"1.{rng.randint(0, 5)}.{rng.randint(0, 3)}" for _ in range(rng.randint(2, 8))},
                          key=parse_version)
        if len(versions) < 2:
            versions.append("1.9.0")
        advisories, affected_sets = [], []
        for i in range(rng.randint(0, 6)):
            hit = frozenset(v for v in versions if rng.random() < 0.4)
            affected_sets.append(hit)
            advisories.append(Advisory(f"A{i}", rng.choice(list(Severity)),
                                       (AffectedPackage("lib", frozenset(map(parse_version, hit))),)))
        db = AdvisoryDb(advisories)
        upgrades = []
        for _ in range(rng.randint(1, 5)):
            a, b = sorted(rng.sample(versions, 2), key=parse_version)
            upgrades.append(Upgrade("lib", parse_version(a), parse_version(b)))
        for u in upgrades:
            if security_delta(db, u).delta != -security_delta(db, u.reversed()).delta:
                failures += 1
        report = impact_report(db, upgrades)
        distinct = set(upgrades)
        if report.reduced_count + report.increased_count + report.unchanged_count != len(distinct):
            failures += 1
        expected_total = sum(
            sum(str(u.to_version) in s for s in affected_sets) - sum(str(u.from_version) in s for s in affected_sets)
            for u in distinct
        )
        if report.total_delta != expected_total:
            failures += 1
    verdict(6, failures == 0, f"1000 random advisory fixtures, {failures} property violations")


def _report(i, lines):
    return CoverageReport(LibraryRef(f"u{i}", "1"), LibraryRef("lib", "1"), frozenset(("F", n) for n in lines))


def test_criterion_7_coverage_estimator():
    start = time.perf_counter()
    rng = random.Random(7)
    problems = 0
    for _ in range(200):
        sets = [frozenset(rng.sample(range(1, 60), rng.randint(0, 25))) for _ in range(rng.randint(1, 6))]
        reports = [_report(i, s) for i, s in enumerate(sets)]
        means = []
        for n in range(1, len(sets) + 1):
            m = sampled_union_mean(reports, n)
            problems += m != exhaustive_union_mean(sets, n)
            means.append(m)
        problems += any(b < a for a, b in zip(means, means[1:]))
    for k in (7, 10, 15):
        disjoint = [_report(i, range(i * 40 + 1, i * 40 + 41)) for i in range(k)]
        curve = improvement_curve({LibraryRef("lib", "1"): disjoint})
        problems += any(curve[n] != n - 1 for n in range(1, k + 1))
    groups = group_by_dep(ingest_coverage(FIXTURES / "coverage_curve.jsonl"))
    for reports in groups.values():
        means = [sampled_union_mean(reports, n) for n in range(1, len(reports) + 1)]
        problems += any(b < a for a, b in zip(means, means[1:]))
    elapsed = time.perf_counter() - start
    verdict(7, problems == 0 and elapsed < 10, f"{problems} estimator discrepancies, {elapsed:.2f}s")


def test_criterion_8_coverage_curve_shape():
    groups = group_by_dep(ingest_coverage(FIXTURES / "coverage_curve.jsonl"))
    curve = improvement_curve(groups, samples=50, seed=0)
    ok = abs(curve[2] - 0.40) <= 0.05 and abs(curve[5] - 1.00) <= 0.05
    verdict(8, ok, f"improvement {100 * curve[2]:.1f}% at n=2 (target 40), {100 * curve[5]:.1f}% at n=5 (target 100)")


def _batch_cfg(**kw):
    return RunConfig(
        snapshot=str(FIXTURES / "e2e_snapshot.jsonl"),
        advisories=str(FIXTURES / "e2e_advisories.jsonl"),
        executor_config=str(FIXTURES / "e2e_script.jsonl"),
        anchors=5,
        seed=11,
        format="json",
        **kw,
    ).validate()


def test_criterion_9_batch_determinism():
    start = time.perf_counter()
    outputs = [cmd_batch(_batch_cfg(jobs=jobs))[0] for jobs in (1, 4) for _ in range(3)]
    elapsed = time.perf_counter() - start
    identical = len(set(outputs)) == 1
    rows = len(json.loads(outputs[0])["rows"])
    verdict(9, identical and rows > 0 and elapsed < 60,
            f"6 runs over {rows} upgrades, byte-identical={identical}, {elapsed:.1f}s")


def test_criterion_10_store_replay(tmp_path):
    mismatches = compared = 0
    for seed in (0, 11, 12345):
        for jobs in (1, 4):
            store = tmp_path / f"store-{seed}-{jobs}.jsonl"
            cfg = _batch_cfg(jobs=jobs, store=str(store))
            cfg.seed = seed
            report = json.loads(cmd_batch(cfg)[0])
            replayed = {str(a.upgrade): a.confidence for a in replay(store, r=cfg.reps)}
            for row in report["rows"]:
                if row["status"] == "error":
                    continue
                compared += 1
                mismatches += replayed.get(row["upgrade"]) != row["confidence"]
    snap = ingest_snapshot(FIXTURES / "walkthrough_snapshot.jsonl")
    store = tmp_path / "walkthrough.jsonl"
    a = assess_upgrade(snap, Upgrade.parse("jackson-databind:2.10.0:2.11.0"),
                       ScriptedExecutor.from_file(FIXTURES / "walkthrough_script.jsonl"),
                       store=ResultStore(store))
    [b] = replay(store)
    compared += 1
    mismatches += a.confidence != b.confidence
    verdict(10, compared > 0 and mismatches == 0, f"{compared} stored assessments replayed, {mismatches} mismatches")

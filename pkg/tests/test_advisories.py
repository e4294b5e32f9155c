import io
import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_snapshot, ref
from pinfresh.advisories import (
    Advisory,
    AdvisoryDb,
    AffectedPackage,
    Severity,
    impact_report,
    ingest_advisories,
    security_delta,
    vulns_of,
)
from pinfresh.errors import DuplicateAdvisoryId, MalformedRecord
from pinfresh.pins import Upgrade
from pinfresh.versioning import parse_version


def feed(*records):
    return io.StringIO("".join(json.dumps(r) + "\n" for r in records))


def db_of(mapping):
    """``{advisory_id: {(name, version_text), ...}}`` -> AdvisoryDb."""
    advisories = []
    for adv_id, affected in mapping.items():
        by_name = {}
        for name, version in affected:
            by_name.setdefault(name, set()).add(parse_version(version))
        advisories.append(Advisory(adv_id, Severity.HIGH, tuple(AffectedPackage(n, frozenset(v)) for n, v in by_name.items())))
    return AdvisoryDb(advisories)


def up(name, a, b):
    return Upgrade(name, parse_version(a), parse_version(b))


def test_explicit_versions_lookup():
    db = ingest_advisories(feed({"id": "A1", "severity": "high", "affected": [{"name": "x", "versions": ["1.0.0", "1.0.1", "1.0.2", "1.0.3"]}]}))
    for v in ("1.0.0", "1.0.1", "1.0.2", "1.0.3"):
        assert vulns_of(db, ref(f"x@{v}")) == {"A1"}
    assert vulns_of(db, ref("x@1.0.4")) == set()
    assert vulns_of(db, ref("y@1.0.0")) == set()
    assert db["A1"].severity is Severity.HIGH


def test_empty_file():
    db = ingest_advisories(io.StringIO(""))
    assert len(db) == 0
    assert vulns_of(db, ref("x@1.0")) == set()


def test_version_text_normalised():
    db = ingest_advisories(feed({"id": "A1", "affected": [{"name": "x", "versions": ["1.2"]}]}))
    assert vulns_of(db, ref("x@1.2.0")) == {"A1"}
    assert vulns_of(db, ref("x@LATEST")) == set()
    assert db["A1"].severity is Severity.UNKNOWN


def test_random_db_matches_linear_scan():
    rng = random.Random(42)
    records = []
    for i in range(100):
        affected = []
        for name in rng.sample(["a", "b", "c", "d"], rng.randint(1, 3)):
            versions = sorted({f"1.{rng.randint(0, 9)}.0" for _ in range(rng.randint(1, 4))})
            affected.append({"name": name, "versions": versions})
        records.append({"id": f"ADV-{i}", "severity": rng.choice(["low", "high", "critical"]), "affected": affected})
    db = ingest_advisories(feed(*records))
    for name in "abcde":
        for minor in range(11):
            v = f"1.{minor}.0"
            expected = {
                r["id"] for r in records
                if any(a["name"] == name and v in a["versions"] for a in r["affected"])
            }
            assert vulns_of(db, ref(f"{name}@{v}")) == expected


def test_duplicate_id():
    rec = {"id": "A1", "affected": [{"name": "x", "versions": ["1.0"]}]}
    with pytest.raises(DuplicateAdvisoryId) as err:
        ingest_advisories(feed(rec, rec))
    assert err.value.line == 2


@pytest.mark.parametrize(
    "rec",
    [
        {"affected": [{"name": "x", "versions": ["1.0"]}]},
        {"id": "A", "affected": []},
        {"id": "A", "affected": [{"name": "x", "versions": []}]},
        {"id": "A", "affected": [{"name": "x", "versions": ["garbage"]}]},
        {"id": "A", "affected": [{"name": "x"}]},
        {"id": "A", "affected": [{"name": "x", "introduced": "1.0"}]},  # range without snapshot
    ],
)
def test_malformed(rec):
    with pytest.raises(MalformedRecord):
        ingest_advisories(feed(rec))


def test_range_expanded_against_snapshot():
    snap = make_snapshot({"x@1.0": 0, "x@1.1": 1, "x@1.2": 2, "x@2.0": 3, "y@1.0": 0})
    db = ingest_advisories(
        feed(
            {"id": "R1", "affected": [{"name": "x", "introduced": "1.1", "fixed": "2.0"}]},
            {"id": "R2", "affected": [{"name": "x", "introduced": "0"}]},
            {"id": "R3", "affected": [{"name": "x", "fixed": "1.1"}]},
            {"id": "GONE", "affected": [{"name": "zzz", "introduced": "0"}]},
        ),
        snap,
    )
    assert vulns_of(db, ref("x@1.0")) == {"R2", "R3"}
    assert vulns_of(db, ref("x@1.1")) == {"R1", "R2"}
    assert vulns_of(db, ref("x@1.2")) == {"R1", "R2"}
    assert vulns_of(db, ref("x@2.0")) == {"R2"}
    assert len(db) == 3


def test_delta_examples():
    db = db_of({"A1": {("d", "1.0")}, "A2": {("d", "1.0"), ("d", "1.1")}})
    d = security_delta(db, up("d", "1.0", "1.1"))
    assert (d.before, d.after, d.delta) == ({"A1", "A2"}, {"A2"}, -1)
    assert security_delta(db, up("d", "1.1", "1.1")).delta == 0


def test_delta_sixty_six_fixed():
    db = db_of({f"CVE-{i}": {("d", "2.0")} for i in range(66)})
    assert security_delta(db, up("d", "2.0", "2.1")).delta == -66


def _report_fixture():
    """9 reducing, 3 increasing and 88 unchanged upgrades."""
    mapping = {}
    upgrades = []
    for i in range(100):
        name = f"lib{i}"
        upgrades.append(up(name, "1.0", "1.1"))
        if i < 9:
            mapping[f"R{i}"] = {(name, "1.0")}
        elif i < 12:
            mapping[f"I{i}"] = {(name, "1.1")}
        elif i < 20:
            mapping[f"S{i}"] = {(name, "1.0"), (name, "1.1")}
    return db_of(mapping), upgrades


def test_impact_report_counts():
    db, upgrades = _report_fixture()
    rep = impact_report(db, upgrades)
    assert (rep.reduced_count, rep.increased_count, rep.unchanged_count) == (9, 3, 88)
    assert rep.reduce_to_increase_ratio == 3.0
    assert rep.total_delta == -9 + 3
    assert rep.fixed_by_severity == {"high": 9}
    # recount oracle
    deltas = [security_delta(db, u).delta for u in upgrades]
    assert rep.total_delta == sum(deltas)
    assert rep.reduced_count == sum(d < 0 for d in deltas)


def test_impact_report_no_increase():
    db = db_of({})
    rep = impact_report(db, [up("a", "1.0", "1.1"), up("b", "1.0", "1.2")])
    assert rep.reduce_to_increase_ratio is None
    assert rep.total_delta == 0
    assert rep.as_dict()["unchanged_count"] == 2


def test_impact_report_single():
    db = db_of({f"A{i}": {("d", "1.0")} for i in range(5)})
    assert impact_report(db, [up("d", "1.0", "1.1")]).total_delta == -5


def test_severity_coercion():
    assert Severity.coerce("CRITICAL") is Severity.CRITICAL
    assert Severity.coerce("moderate") is Severity.MEDIUM
    assert Severity.coerce("spicy") is Severity.UNKNOWN
    assert Severity.coerce(None) is Severity.UNKNOWN


versions = st.sampled_from(["1.0", "1.1", "1.2", "1.3", "2.0"])
affected_sets = st.dictionaries(st.sampled_from([f"A{i}" for i in range(8)]), st.sets(versions, min_size=1), max_size=8)


@given(affected_sets, versions, versions)
def test_delta_antisymmetry(mapping, a, b):
    db = db_of({k: {("d", v) for v in vs} for k, vs in mapping.items()})
    u = up("d", a, b)
    assert security_delta(db, u).delta == -security_delta(db, u.reversed()).delta

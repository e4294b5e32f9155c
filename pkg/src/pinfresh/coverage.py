"""Line-coverage gain from pooling several consumers' test suites."""

from __future__ import annotations

import itertools
import math
import random
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

from . import _jsonl
from .depgraph import LibraryRef, ref_key
from .errors import EmptyInput, InvalidSubsetSize, MalformedRecord, MixedDependency

DEFAULT_SAMPLES = 50


@dataclass(frozen=True)
class CoverageReport:
    consumer: LibraryRef
    dep: LibraryRef
    covered_lines: frozenset  # of (path, line)

    def __post_init__(self):
        lines = frozenset(self.covered_lines)
        for path, line in lines:
            if not isinstance(line, int) or line < 1:
                raise ValueError(f"line numbers must be positive integers, got {line!r} in {path}")
        object.__setattr__(self, "covered_lines", lines)

    def __len__(self):
        return len(self.covered_lines)


def _ref(value, lineno: int) -> LibraryRef:
    if isinstance(value, dict):
        return LibraryRef(_jsonl.require_str(value, "name", lineno), _jsonl.require_str(value, "version", lineno))
    if isinstance(value, str):
        try:
            return LibraryRef.parse(value)
        except ValueError as exc:
            raise MalformedRecord(lineno, str(exc)) from None
    raise MalformedRecord(lineno, "expected 'name@version' or an object with name and version")


def _report_key(r: CoverageReport):
    return (ref_key(r.dep), ref_key(r.consumer))


def ingest_coverage(source) -> list[CoverageReport]:
    """Read coverage records, grouped by dependency then consumer.

    Duplicate line entries collapse, and several records for the same
    (consumer, dependency) pair are merged into one report.
    """
    merged = defaultdict(set)
    for lineno, rec in _jsonl.iter_records(source):
        consumer = _ref(rec.get("consumer"), lineno)
        dep = _ref(rec.get("dep"), lineno)
        lines = rec.get("lines")
        if not isinstance(lines, list):
            raise MalformedRecord(lineno, "'lines' must be a list")
        bucket = merged[(consumer, dep)]
        for entry in lines:
            if not isinstance(entry, dict):
                raise MalformedRecord(lineno, "line entries must be objects with path and line")
            path, line = entry.get("path"), entry.get("line")
            if not isinstance(path, str) or not isinstance(line, int) or isinstance(line, bool) or line < 1:
                raise MalformedRecord(lineno, f"bad line entry {entry!r}")
            bucket.add((path, line))
    reports = [CoverageReport(c, d, frozenset(lines)) for (c, d), lines in merged.items()]
    return sorted(reports, key=_report_key)


def group_by_dep(reports) -> dict:
    groups = defaultdict(list)
    for r in sorted(reports, key=_report_key):
        groups[r.dep].append(r)
    return dict(groups)


def _union_size(reports) -> int:
    covered = set()
    for r in reports:
        covered |= r.covered_lines
    return len(covered)


def union_coverage(reports: Sequence[CoverageReport]) -> int:
    """Number of distinct lines covered by any of ``reports``."""
    if not reports:
        raise EmptyInput("union_coverage needs at least one report")
    deps = {r.dep for r in reports}
    if len(deps) > 1:
        raise MixedDependency(f"reports cover several dependencies: {sorted(map(str, deps))}")
    return _union_size(reports)


def sampled_union_mean(reports: Sequence[CoverageReport], n: int, samples: int = DEFAULT_SAMPLES, seed=0) -> float:
    """Mean union size over subsets of ``n`` reports.

    Draws ``min(samples, C(len(reports), n))`` distinct subsets uniformly
    without replacement. When every subset fits within ``samples``, all of
    them are enumerated and the result is exact.
    """
    if not reports:
        raise EmptyInput("no reports")
    total = len(reports)
    if not 1 <= n <= total:
        raise InvalidSubsetSize(f"subset size {n} outside [1, {total}]")
    if len({r.dep for r in reports}) > 1:
        raise MixedDependency("reports cover several dependencies")
    ordered = sorted(reports, key=_report_key)

    if math.comb(total, n) <= samples:
        subsets = itertools.combinations(range(total), n)
    else:
        rng = random.Random(seed)
        chosen = set()
        while len(chosen) < samples:
            chosen.add(tuple(sorted(rng.sample(range(total), n))))
        subsets = sorted(chosen)
    sizes = [_union_size(ordered[i] for i in idx) for idx in subsets]
    return sum(sizes) / len(sizes)


def _geometric_mean(values) -> float:
    values = list(values)
    if all(v == values[0] for v in values):
        return values[0]
    return math.exp(math.fsum(math.log(v) for v in values) / len(values))


def improvement_curve(
    reports_by_library: Mapping[LibraryRef, Sequence[CoverageReport]],
    samples: int = DEFAULT_SAMPLES,
    seed=0,
) -> dict[int, float]:
    """Coverage improvement of ``n`` pooled suites over a single one, for every ``n``.

    Per dependency the improvement is ``mean_union(n) / mean_union(1) - 1``.
    Dependencies are combined with a geometric mean of ``1 + improvement``
    over those having at least ``n`` reports. Dependencies whose suites
    cover nothing are skipped. Each (dependency, n) draw uses its own
    generator derived from ``seed``.
    """
    per_dep = {}
    for dep in sorted(reports_by_library, key=ref_key):
        reports = reports_by_library[dep]
        if not reports:
            raise EmptyInput(f"no reports for {dep}")
        means = {
            n: sampled_union_mean(reports, n, samples, seed=f"{seed}|{dep}|{n}")
            for n in range(1, len(reports) + 1)
        }
        if means[1] == 0:
            continue
        per_dep[dep] = {n: m / means[1] for n, m in means.items()}

    curve = {}
    top = max((len(ratios) for ratios in per_dep.values()), default=0)
    for n in range(1, top + 1):
        factors = [ratios[n] for ratios in per_dep.values() if n in ratios]
        curve[n] = _geometric_mean(factors) - 1.0
    return curve


def single_suite_means(reports_by_library) -> dict:
    """Average lines covered by one consumer suite, per dependency."""
    return {
        dep: sum(len(r) for r in reports) / len(reports)
        for dep, reports in sorted(reports_by_library.items(), key=lambda kv: ref_key(kv[0]))
        if reports
    }

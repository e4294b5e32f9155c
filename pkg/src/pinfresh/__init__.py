"""pinfresh: stale dependency pins, their security cost, and crowdsourced upgrade confidence."""

from .advisories import AdvisoryDb, ingest_advisories, impact_report, security_delta, vulns_of
from .coverage import (
    CoverageReport,
    improvement_curve,
    ingest_coverage,
    sampled_union_mean,
    union_coverage,
)
from .depgraph import LibraryRef, Snapshot, export_snapshot, ingest_snapshot
from .pins import (
    FreshPin,
    PinAge,
    PinDataset,
    PinKind,
    StalePin,
    Upgrade,
    build_pin_dataset,
    classify_pin,
    dataset_stats,
    find_stale_pins,
    pin_age,
)
from .versioning import Version, compare, is_semver_compatible, parse_version

__version__ = "0.1.0"

__all__ = [
    "AdvisoryDb",
    "build_pin_dataset",
    "classify_pin",
    "compare",
    "CoverageReport",
    "dataset_stats",
    "export_snapshot",
    "find_stale_pins",
    "FreshPin",
    "impact_report",
    "improvement_curve",
    "ingest_advisories",
    "ingest_coverage",
    "ingest_snapshot",
    "is_semver_compatible",
    "LibraryRef",
    "parse_version",
    "pin_age",
    "PinAge",
    "PinDataset",
    "PinKind",
    "sampled_union_mean",
    "security_delta",
    "Snapshot",
    "StalePin",
    "union_coverage",
    "Upgrade",
    "Version",
    "vulns_of",
]

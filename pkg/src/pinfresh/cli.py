"""Command-line front end: ``pinfresh {pins,security,assess,batch,coverage}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import statistics
import sys
from dataclasses import dataclass, fields
from typing import Optional

from .advisories import ingest_advisories, impact_report, security_delta
from .coverage import group_by_dep, improvement_curve, ingest_coverage, single_suite_means
from .crowdtest import CommandExecutor, ResultStore, ScriptedExecutor, assess_upgrade, batch_assess
from .crowdtest.executors import read_key_value
from .depgraph import Snapshot, ingest_snapshot
from .errors import PinfreshError
from .pins import PinDataset, PinKind, Upgrade, build_pin_dataset, dataset_csv, dataset_stats, pin_age

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ZERO_CONFIDENCE = 2
EXIT_UNTESTED = 3


@dataclass
class RunConfig:
    snapshot: Optional[str] = None
    advisories: Optional[str] = None
    coverage: Optional[str] = None
    executor: str = "scripted"
    executor_config: Optional[str] = None
    store: Optional[str] = None
    reps: int = 5
    anchors: int = 500
    jobs: int = 1
    seed: int = 0
    samples: int = 50
    kind: str = "direct"
    format: str = "human"
    out: Optional[str] = None

    def validate(self):
        if self.reps < 1:
            raise ValueError("--reps must be at least 1")
        if self.jobs < 1:
            raise ValueError("--jobs must be at least 1")
        if self.anchors < 1:
            raise ValueError("--anchors must be at least 1")
        if self.executor not in ("scripted", "command"):
            raise ValueError(f"unknown executor {self.executor!r}")
        if self.format not in ("human", "json", "csv"):
            raise ValueError(f"unknown format {self.format!r}")
        if self.kind not in ("direct", "indirect", "all"):
            raise ValueError(f"unknown pin kind {self.kind!r}")
        return self

    @property
    def pin_kind(self) -> Optional[PinKind]:
        return None if self.kind == "all" else PinKind(self.kind)

    def need(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ValueError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def render_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _dataset(cfg: RunConfig, snapshot: Snapshot) -> PinDataset:
    if len(snapshot) == 0:
        return PinDataset()
    return build_pin_dataset(snapshot, min(cfg.anchors, len(snapshot.names())))


def _executor(cfg: RunConfig):
    cfg.need("executor_config")
    if cfg.executor == "scripted":
        return ScriptedExecutor.from_file(cfg.executor_config, seed=cfg.seed)
    return CommandExecutor.from_config(cfg.executor_config)


def _median(values):
    return statistics.median(values) if values else None


def cmd_pins(cfg: RunConfig) -> tuple[str, int]:
    cfg.need("snapshot")
    snapshot = ingest_snapshot(cfg.snapshot)
    dataset = _dataset(cfg, snapshot)
    stats = dataset_stats(dataset)
    if cfg.format == "csv":
        return dataset_csv(dataset), EXIT_OK

    age = {}
    for kind in PinKind:
        ages = [pin_age(snapshot, p) for p in dataset.pins_of(kind)]
        age[kind.value] = {
            "median_staleness_days": _median([a.staleness_days for a in ages]),
            "median_versions_behind": _median([a.versions_behind for a in ages]),
        }
    if cfg.format == "json":
        report = {
            "anchors": list(dataset.anchors),
            "stats": stats,
            "age": age,
            "pins": [p.as_record() for p in dataset.pins],
            "skipped_versions": [str(r) for r in snapshot.skipped],
        }
        return render_json(report), EXIT_OK

    lines = [f"anchors: {len(dataset.anchors)}   consumers: {stats['total']['consumers']}"]
    lines.append(f"{'kind':<9}{'consumers':>10}{'stale':>8}{'pct':>9}{'deps':>8}{'upgrades':>10}{'med.days':>10}{'med.vers':>10}")
    for kind in PinKind:
        row, a = stats[kind.value], age[kind.value]
        lines.append(
            f"{kind.value:<9}{row['consumers']:>10}{row['stale_consumers']:>8}{row['stale_consumer_pct']:>8.1f}%"
            f"{row['deps']:>8}{row['upgrades']:>10}{_fmt(a['median_staleness_days']):>10}{_fmt(a['median_versions_behind']):>10}"
        )
    return "\n".join(lines) + "\n", EXIT_OK


def _fmt(value):
    return "-" if value is None else f"{value:g}"


def cmd_security(cfg: RunConfig) -> tuple[str, int]:
    cfg.need("snapshot", "advisories")
    snapshot = ingest_snapshot(cfg.snapshot)
    db = ingest_advisories(cfg.advisories, snapshot)
    upgrades = _dataset(cfg, snapshot).upgrades_of(cfg.pin_kind)
    deltas = [security_delta(db, u) for u in upgrades]
    report = impact_report(db, upgrades).as_dict()
    if cfg.format == "csv":
        return _csv(
            ("upgrade", "delta", "before", "after"),
            [(str(d.upgrade), d.delta, len(d.before), len(d.after)) for d in deltas],
        ), EXIT_OK
    if cfg.format == "json":
        report["upgrades"] = [
            {"upgrade": str(d.upgrade), "delta": d.delta, "before": sorted(d.before), "after": sorted(d.after)}
            for d in deltas
        ]
        return render_json(report), EXIT_OK
    ratio = report["reduce_to_increase_ratio"]
    lines = [
        f"upgrades:  {len(deltas)}",
        f"reduced:   {report['reduced_count']}",
        f"increased: {report['increased_count']}",
        f"unchanged: {report['unchanged_count']}",
        f"ratio:     {'n/a' if ratio is None else f'{ratio:.2f}x'}",
        f"total delta: {report['total_delta']}",
    ]
    return "\n".join(lines) + "\n", EXIT_OK


def cmd_assess(cfg: RunConfig, upgrade_spec: str) -> tuple[str, int]:
    cfg.need("snapshot")
    upgrade = Upgrade.parse(upgrade_spec)
    snapshot = ingest_snapshot(cfg.snapshot)
    store = ResultStore(cfg.store) if cfg.store else None
    a = assess_upgrade(snapshot, upgrade, _executor(cfg), r=cfg.reps, jobs=cfg.jobs, store=store)
    code = {"positive": EXIT_OK, "zero": EXIT_ZERO_CONFIDENCE, "untested": EXIT_UNTESTED}[a.status]
    if cfg.format == "json":
        return render_json(a.as_dict()), code
    if cfg.format == "csv":
        rows = [(str(c), v.value, "") for c, v in sorted(a.votes.items(), key=lambda kv: str(kv[0]))]
        rows += [(str(c), "untested", why) for c, why in sorted(a.untested_consumers.items(), key=lambda kv: str(kv[0]))]
        return _csv(("consumer", "vote", "reason"), rows), code
    lines = [f"upgrade: {upgrade}", a.summary_line()]
    for c, v in sorted(a.votes.items(), key=lambda kv: str(kv[0])):
        lines.append(f"  {v.value:<7}{c}")
    for c, why in sorted(a.untested_consumers.items(), key=lambda kv: str(kv[0])):
        lines.append(f"  {'untested':<9}{c} ({why})")
    return "\n".join(lines) + "\n", code


def cmd_batch(cfg: RunConfig) -> tuple[str, int]:
    cfg.need("snapshot", "advisories")
    snapshot = ingest_snapshot(cfg.snapshot)
    db = ingest_advisories(cfg.advisories, snapshot)
    dataset = _dataset(cfg, snapshot)
    store = ResultStore(cfg.store) if cfg.store else None
    report = batch_assess(snapshot, dataset, db, _executor(cfg), r=cfg.reps, jobs=cfg.jobs, store=store, kind=cfg.pin_kind)
    if cfg.format == "json":
        return render_json(report), EXIT_OK
    if cfg.format == "csv":
        return _csv(
            ("upgrade", "delta", "confidence", "consumers", "status"),
            [(r["upgrade"], r["delta"], r["confidence"], r["consumers"], r["status"]) for r in report["rows"]],
        ), EXIT_OK
    lines = [f"{'category':<10}{'upgrades':>10}{'consumers':>11}"]
    for key, part in report["partition"].items():
        lines.append(f"{key:<10}{part['upgrades']:>10}{part['consumers']:>11}")
    if report["consumers_by_min_confidence"]:
        lines.append("")
        lines.append("min confidence -> consumers")
        for k, n in report["consumers_by_min_confidence"].items():
            lines.append(f"  >= {k:<4}{n}")
    return "\n".join(lines) + "\n", EXIT_OK


def cmd_coverage(cfg: RunConfig) -> tuple[str, int]:
    cfg.need("coverage")
    groups = group_by_dep(ingest_coverage(cfg.coverage))
    curve = improvement_curve(groups, samples=cfg.samples, seed=cfg.seed)
    if cfg.format == "csv":
        return _csv(("suites", "improvement"), [(n, f"{v:.6f}") for n, v in curve.items()]), EXIT_OK
    if cfg.format == "json":
        report = {
            "improvement": {str(n): v for n, v in curve.items()},
            "single_suite_mean_lines": {str(d): m for d, m in single_suite_means(groups).items()},
        }
        return render_json(report), EXIT_OK
    lines = [f"{'suites':>6}  improvement"]
    lines += [f"{n:>6}  {100 * v:8.1f}%" for n, v in curve.items()]
    return "\n".join(lines) + "\n", EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file supplying defaults for any option below")
    common.add_argument("--snapshot", help="snapshot file (newline-delimited JSON)")
    common.add_argument("--advisories", help="advisory file (newline-delimited JSON)")
    common.add_argument("--coverage", help="coverage file (newline-delimited JSON)")
    common.add_argument("--executor", choices=("scripted", "command"))
    common.add_argument("--executor-config", dest="executor_config", help="script file or command config")
    common.add_argument("--store", help="append-only result store")
    common.add_argument("--reps", type=int, help="repetitions per test (default 5)")
    common.add_argument("--anchors", type=int, help="number of anchor libraries (default 500)")
    common.add_argument("--jobs", type=int, help="consumer suites run in parallel (default 1)")
    common.add_argument("--seed", type=int, help="seed for all randomness (default 0)")
    common.add_argument("--samples", type=int, help="max subsets sampled per coverage point (default 50)")
    common.add_argument("--kind", choices=("direct", "indirect", "all"), help="pin kind to analyse (default direct)")
    common.add_argument("--format", choices=("human", "json", "csv"))
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pinfresh", description="Find stale dependency pins and score upgrades.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("pins", parents=[common], help="stale pin dataset and statistics")
    sub.add_parser("security", parents=[common], help="security impact of upgrading stale pins")
    p = sub.add_parser("assess", parents=[common], help="crowdsourced confidence for one upgrade")
    p.add_argument("upgrade", help="name:from:to")
    sub.add_parser("batch", parents=[common], help="assess every vulnerability-reducing upgrade")
    sub.add_parser("coverage", parents=[common], help="coverage improvement curve")
    return parser


_INT_FIELDS = {f.name for f in fields(RunConfig) if f.type in ("int", int)}


def make_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        for key, value in read_key_value(args.config).items():
            key = key.replace("-", "_")
            if not hasattr(cfg, key):
                raise ValueError(f"{args.config}: unknown option {key!r}")
            setattr(cfg, key, int(value) if key in _INT_FIELDS else value)
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    return cfg.validate()


COMMANDS = {
    "pins": cmd_pins,
    "security": cmd_security,
    "batch": cmd_batch,
    "coverage": cmd_coverage,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        if args.command == "assess":
            text, code = cmd_assess(cfg, args.upgrade)
        else:
            text, code = COMMANDS[args.command](cfg)
    except (PinfreshError, OSError, ValueError) as exc:
        print(f"pinfresh: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Test executors: where consumer test suites actually get run.

The protocol only talks to executors through three calls:

* ``availability(consumer)`` - does the consumer publish runnable tests?
* ``discover(consumer)`` - which tests does it have?
* ``run(test, dep, repetition)`` - one run of one test against one dependency version.
"""

from __future__ import annotations

import abc
import logging
import random
import shlex
import subprocess
import threading
import time
from collections import defaultdict
from typing import Optional

from .. import _jsonl
from ..depgraph import LibraryRef
from ..errors import ExecutorFailure, MalformedRecord, UnparseableVersion
from ..versioning import parse_version
from .model import OutcomeClass, TestId

logger = logging.getLogger(__name__)

DEFAULT_TEST_TIMEOUT = 60.0
DEFAULT_CONSUMER_BUDGET = 30 * 60.0


class TestExecutor(abc.ABC):
    __test__ = False

    @abc.abstractmethod
    def availability(self, consumer: LibraryRef) -> bool:
        ...

    @abc.abstractmethod
    def discover(self, consumer: LibraryRef) -> list[TestId]:
        ...

    @abc.abstractmethod
    def run(self, test: TestId, dep: LibraryRef, repetition: Optional[int] = None) -> OutcomeClass:
        """Run ``test`` once with ``dep`` substituted; return PASS or FAIL."""


def _consumer_ref(value, lineno: int) -> LibraryRef:
    if isinstance(value, dict):
        return LibraryRef(_jsonl.require_str(value, "name", lineno), _jsonl.require_str(value, "version", lineno))
    if isinstance(value, str):
        try:
            return LibraryRef.parse(value)
        except ValueError as exc:
            raise MalformedRecord(lineno, str(exc)) from None
    raise MalformedRecord(lineno, "consumer must be 'name@version' or an object")


class ScriptedExecutor(TestExecutor):
    """Replays outcomes from a script instead of running anything.

    Each script entry maps ``(consumer, test, dep_version)`` to a list of
    outcomes, cycled by repetition index. ``dep_version`` may be ``"*"`` to
    match any version. An entry may carry ``flaky``, a probability of
    flipping each outcome; flips are drawn from a generator seeded by
    ``seed`` and the call coordinates, so results do not depend on call
    order or threading.

    Consumers absent from the script are unavailable. A record of the form
    ``{"consumer": ..., "available": false}`` marks one explicitly, and
    ``{"consumer": ..., "error": "..."}`` makes discovery fail for it.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._entries = defaultdict(dict)  # test -> {dep_version: (outcomes, flaky)}
        self._tests = defaultdict(set)
        self._unavailable = set()
        self._errors = {}
        self._counters = defaultdict(int)
        self._lock = threading.Lock()

    def add(self, consumer: LibraryRef, suite: str, method: str, dep_version: str, outcomes, flaky: float = 0.0):
        outcomes = [OutcomeClass(o) for o in outcomes]
        if not outcomes or any(o is OutcomeClass.FLAKY for o in outcomes):
            raise ValueError("scripted outcomes must be a non-empty list of pass/fail")
        test = TestId(consumer, suite, method)
        self._entries[test][dep_version] = (outcomes, float(flaky))
        self._tests[consumer].add(test)
        return self

    def mark_unavailable(self, consumer: LibraryRef):
        self._unavailable.add(consumer)
        return self

    def mark_error(self, consumer: LibraryRef, reason: str):
        self._errors[consumer] = reason
        return self

    @classmethod
    def from_file(cls, source, seed: int = 0) -> "ScriptedExecutor":
        ex = cls(seed)
        for lineno, rec in _jsonl.iter_records(source):
            consumer = _consumer_ref(rec.get("consumer"), lineno)
            if rec.get("available") is False:
                ex.mark_unavailable(consumer)
                continue
            if "error" in rec:
                ex.mark_error(consumer, str(rec["error"]))
                continue
            test = rec.get("test")
            if not isinstance(test, dict):
                raise MalformedRecord(lineno, "'test' must be an object with suite and method")
            try:
                ex.add(
                    consumer,
                    _jsonl.require_str(test, "suite", lineno),
                    _jsonl.require_str(test, "method", lineno),
                    _jsonl.require_str(rec, "dep_version", lineno),
                    rec.get("outcomes") or [],
                    rec.get("flaky", 0.0),
                )
            except ValueError as exc:
                raise MalformedRecord(lineno, str(exc)) from None
        return ex

    def availability(self, consumer):
        if consumer in self._unavailable:
            return False
        return consumer in self._errors or bool(self._tests.get(consumer))

    def discover(self, consumer):
        if consumer in self._errors:
            raise ExecutorFailure(consumer, self._errors[consumer])
        return sorted(self._tests.get(consumer, ()), key=lambda t: t.sort_key)

    def _lookup(self, test, dep):
        table = self._entries.get(test)
        if table is None:
            raise ExecutorFailure(test.consumer, f"no script for test {test}")
        if dep.version in table:
            return table[dep.version]
        try:
            wanted = parse_version(dep.version)
        except UnparseableVersion:
            wanted = None
        for key, entry in sorted(table.items()):
            if key == "*":
                continue
            try:
                if wanted is not None and parse_version(key) == wanted:
                    return entry
            except UnparseableVersion:
                pass
        if "*" in table:
            return table["*"]
        raise ExecutorFailure(test.consumer, f"no scripted outcome for {test} at {dep}")

    def run(self, test, dep, repetition=None):
        if repetition is None:
            with self._lock:
                repetition = self._counters[(test, dep)]
                self._counters[(test, dep)] += 1
        outcomes, flaky = self._lookup(test, dep)
        outcome = outcomes[repetition % len(outcomes)]
        if flaky > 0:
            rng = random.Random(f"{self.seed}|{test.consumer}|{test}|{dep}|{repetition}")
            if rng.random() < flaky:
                outcome = OutcomeClass.FAIL if outcome is OutcomeClass.PASS else OutcomeClass.PASS
        return outcome


class CommandExecutor(TestExecutor):
    """Runs tests by invoking external commands.

    ``run_cmd`` is a command template; placeholders ``{consumer}``,
    ``{consumer_name}``, ``{consumer_version}``, ``{dep_name}``,
    ``{dep_version}``, ``{test}``, ``{suite}`` and ``{method}`` are filled in
    per argument after shell-style splitting, so values are never
    re-interpreted by a shell. Exit status 0 is a pass; any other status or
    a timeout is a fail. Output is never inspected.

    ``discover_cmd`` must print one ``suite#method`` per line.
    ``available_cmd``, when set, decides availability by exit status.
    """

    def __init__(
        self,
        run_cmd: str,
        discover_cmd: Optional[str] = None,
        available_cmd: Optional[str] = None,
        timeout: float = DEFAULT_TEST_TIMEOUT,
        budget: float = DEFAULT_CONSUMER_BUDGET,
    ):
        self.run_cmd = run_cmd
        self.discover_cmd = discover_cmd
        self.available_cmd = available_cmd
        self.timeout = float(timeout)
        self.budget = float(budget)
        self._spent = defaultdict(float)
        self._lock = threading.Lock()
        for tmpl in (run_cmd, discover_cmd, available_cmd):
            if tmpl is not None:
                self._render(tmpl, LibraryRef("c", "0"), None, None)

    @classmethod
    def from_config(cls, path) -> "CommandExecutor":
        """Read ``key = value`` lines: run_cmd, discover_cmd, available_cmd, timeout, budget."""
        conf = read_key_value(path)
        if "run_cmd" not in conf:
            raise ValueError(f"{path}: run_cmd is required")
        return cls(
            conf["run_cmd"],
            conf.get("discover_cmd"),
            conf.get("available_cmd"),
            float(conf.get("timeout", DEFAULT_TEST_TIMEOUT)),
            float(conf.get("budget", DEFAULT_CONSUMER_BUDGET)),
        )

    @staticmethod
    def _render(template, consumer, test, dep) -> list[str]:
        values = {
            "consumer": str(consumer),
            "consumer_name": consumer.name,
            "consumer_version": consumer.version,
            "dep_name": dep.name if dep else "",
            "dep_version": dep.version if dep else "",
            "test": str(test) if test else "",
            "suite": test.suite if test else "",
            "method": test.method if test else "",
        }
        try:
            return [tok.format_map(values) for tok in shlex.split(template)]
        except (KeyError, IndexError, ValueError) as exc:
            raise ValueError(f"bad command template {template!r}: {exc}") from None

    def _exec(self, argv, consumer, timeout):
        with self._lock:
            if self._spent[consumer] >= self.budget:
                raise ExecutorFailure(consumer, f"time budget of {self.budget:.0f}s exhausted")
        start = time.monotonic()
        try:
            return subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired:
            return None
        except OSError as exc:
            raise ExecutorFailure(consumer, f"cannot execute {argv[0]!r}: {exc}") from None
        finally:
            with self._lock:
                self._spent[consumer] += time.monotonic() - start

    def availability(self, consumer):
        if self.available_cmd is None:
            return True
        try:
            proc = self._exec(self._render(self.available_cmd, consumer, None, None), consumer, self.timeout)
        except ExecutorFailure:
            return False
        return proc is not None and proc.returncode == 0

    def discover(self, consumer):
        if self.discover_cmd is None:
            raise ExecutorFailure(consumer, "no discover_cmd configured")
        proc = self._exec(self._render(self.discover_cmd, consumer, None, None), consumer, self.timeout)
        if proc is None:
            raise ExecutorFailure(consumer, "test discovery timed out")
        if proc.returncode != 0:
            raise ExecutorFailure(consumer, f"test discovery exited with status {proc.returncode}")
        tests = []
        for line in proc.stdout.splitlines():
            line = line.strip()
            if not line:
                continue
            suite, sep, method = line.partition("#")
            if not sep:
                raise ExecutorFailure(consumer, f"discovery output {line!r} is not suite#method")
            tests.append(TestId(consumer, suite, method))
        return sorted(set(tests), key=lambda t: t.sort_key)

    def run(self, test, dep, repetition=None):
        proc = self._exec(self._render(self.run_cmd, test.consumer, test, dep), test.consumer, self.timeout)
        if proc is None:
            logger.info("%s timed out after %.0fs; counted as fail", test, self.timeout)
            return OutcomeClass.FAIL
        return OutcomeClass.PASS if proc.returncode == 0 else OutcomeClass.FAIL


def read_key_value(path) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment line."""
    conf = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise MalformedRecord(lineno, f"expected key=value, got {line!r}")
            value = value.strip()
            if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
                value = value[1:-1]
            conf[key.strip()] = value
    return conf

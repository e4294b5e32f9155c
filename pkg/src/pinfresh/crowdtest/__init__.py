"""Crowdsourced regression testing of dependency upgrades."""

from .executors import CommandExecutor, ScriptedExecutor, TestExecutor
from .model import (
    DEFAULT_REPETITIONS,
    Assessment,
    ExecutionRecord,
    OutcomeClass,
    TestId,
    Vote,
    classify_outcome,
    confidence,
    vote,
    votes_from_records,
)
from .protocol import assess_upgrade, batch_assess
from .store import ResultStore, replay

__all__ = [
    "Assessment",
    "CommandExecutor",
    "DEFAULT_REPETITIONS",
    "ExecutionRecord",
    "OutcomeClass",
    "ResultStore",
    "ScriptedExecutor",
    "TestExecutor",
    "TestId",
    "Vote",
    "assess_upgrade",
    "batch_assess",
    "classify_outcome",
    "confidence",
    "replay",
    "vote",
    "votes_from_records",
]

import random
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from pinfresh.depgraph import LibraryRef, Snapshot

FIXTURES = Path(__file__).parent / "fixtures"
EPOCH = datetime(2020, 1, 1, tzinfo=timezone.utc)


def day(n):
    return EPOCH + timedelta(days=n)


def ref(text):
    return LibraryRef.parse(text)


def make_snapshot(libs, edges=()):
    """``libs`` maps ``"name@version"`` to a publish day offset."""
    return Snapshot({ref(k): day(v) for k, v in libs.items()}, [(ref(a), ref(b)) for a, b in edges])


def random_graph(rng, max_libs=50, max_edges=200, names=6, inject_cycle=True):
    """Random raw snapshot data: ({(name, version): datetime}, [(a, b), ...])."""
    libs = {}
    target = rng.randint(2, max_libs)
    pool = [f"lib{i}" for i in range(names)]
    attempts = 0
    while len(libs) < target and attempts < 10 * max_libs:
        attempts += 1
        name = rng.choice(pool)
        version = f"{rng.randint(1, 2)}.{rng.randint(0, 4)}.{rng.randint(0, 2)}"
        if (name, version) not in libs:
            # coarse days so equal timestamps occur
            libs[(name, version)] = day(rng.randint(0, 40))
    nodes = sorted(libs)
    edges = set()
    for _ in range(rng.randint(0, max_edges - 3)):
        a, b = rng.choice(nodes), rng.choice(nodes)
        if a != b:
            edges.add((a, b))
    if inject_cycle and len(nodes) >= 3:
        a, b, c = rng.sample(nodes, 3)
        edges |= {(a, b), (b, c), (c, a)}
    return libs, sorted(edges)


def to_snapshot(libs, edges):
    return Snapshot({LibraryRef(*k): v for k, v in libs.items()}, [(LibraryRef(*a), LibraryRef(*b)) for a, b in edges])


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def rng():
    return random.Random(1234)

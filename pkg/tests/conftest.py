"""Shared fixtures and the hypothesis profiles."""
import json
import os
from collections import deque
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.register_profile("quick", deadline=None, max_examples=10)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parents[1]
CACHE = ROOT / "results" / "cache"


@pytest.fixture(scope="session")
def golden():
    return json.loads((Path(__file__).parent / "golden.json").read_text())


def bfs_component(region, bits, start):
    """Plain BFS over open sites, used as an oracle independent of union-find."""
    if not bits[start]:
        return set()
    seen = {start}
    todo = deque([start])
    while todo:
        v = todo.popleft()
        for u in region.adjacency(v):
            if bits[u] and u not in seen:
                seen.add(u)
                todo.append(u)
    return seen


def connected(region, bits, A, B):
    """Whether some open site of ``A`` reaches some site of ``B`` (oracle)."""
    reach = set()
    for a in A:
        if a not in reach:
            reach |= bfs_component(region, bits, int(a))
    return any(int(b) in reach for b in B)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

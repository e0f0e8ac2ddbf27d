"""Shared oracles for the test suite."""

from collections import deque

import numpy as np
import pytest


def bfs_cluster_sizes(grid, periodic=False):
    """Sizes of 4-connected components of True cells, by flood fill."""
    grid = np.asarray(grid, dtype=bool)
    L = grid.shape[0]
    seen = np.zeros_like(grid)
    sizes = []
    for r0 in range(L):
        for c0 in range(L):
            if not grid[r0, c0] or seen[r0, c0]:
                continue
            seen[r0, c0] = True
            q = deque([(r0, c0)])
            n = 0
            while q:
                r, c = q.popleft()
                n += 1
                for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    rr, cc = r + dr, c + dc
                    if periodic:
                        rr, cc = rr % L, cc % L
                    elif not (0 <= rr < L and 0 <= cc < L):
                        continue
                    if grid[rr, cc] and not seen[rr, cc]:
                        seen[rr, cc] = True
                        q.append((rr, cc))
            sizes.append(n)
    return sizes


def size_counts(sizes):
    out = {}
    for s in sizes:
        out[int(s)] = out.get(int(s), 0) + 1
    return out


@pytest.fixture
def bfs():
    return bfs_cluster_sizes


# acceptance criteria report one line each at the end of the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

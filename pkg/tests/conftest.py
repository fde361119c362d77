import random

import pytest

from lncapprox.gf import get_field


def dense_rank(field, vectors, k):
    """Plain Gaussian elimination, written independently of EliminationState."""
    rows = [list(v) for v in vectors]
    rank, col = 0, 0
    while rank < len(rows) and col < k:
        piv = next((i for i in range(rank, len(rows)) if rows[i][col]), None)
        if piv is None:
            col += 1
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        inv = field.inv(rows[rank][col])
        rows[rank] = [field.mul(inv, x) for x in rows[rank]]
        for i in range(len(rows)):
            if i != rank and rows[i][col]:
                c = rows[i][col]
                rows[i] = [x ^ field.mul(c, y) for x, y in zip(rows[i], rows[rank])]
        rank += 1
        col += 1
    return rank, rows[:rank]


def in_span(field, vectors, target, k):
    r, _ = dense_rank(field, vectors, k)
    r2, _ = dense_rank(field, list(vectors) + [target], k)
    return r == r2


@pytest.fixture
def gf2():
    return get_field(1)


@pytest.fixture
def gf256():
    return get_field(8)


@pytest.fixture
def rng():
    return random.Random(12345)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts at the end of the run."""
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)

"""State feedback matrices: who is missing which packet.

Packets and receivers are 0-indexed internally.  Row ``n`` of ``wants`` is
receiver ``n``; ``wants[n][k] == 1`` means it lacks packet ``k`` and wants it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence


class SfmError(ValueError):
    pass


class SfmParseError(SfmError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass(frozen=True)
class Sfm:
    wants: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(x) for x in row) for row in self.wants)
        if not rows or not rows[0]:
            raise SfmError("need at least one receiver and one packet")
        k = len(rows[0])
        for row in rows:
            if len(row) != k:
                raise SfmError("ragged want matrix")
            if any(x not in (0, 1) for x in row):
                raise SfmError("want matrix must be binary")
        object.__setattr__(self, "wants", rows)
        object.__setattr__(self, "_w", tuple(sum(row) for row in rows))
        object.__setattr__(
            self, "_want_sets", tuple(frozenset(k for k, x in enumerate(row) if x) for row in rows)
        )
        object.__setattr__(
            self, "_side_sets", tuple(frozenset(k for k, x in enumerate(row) if not x) for row in rows)
        )

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "Sfm":
        return cls(tuple(tuple(r) for r in rows))

    @property
    def n_receivers(self) -> int:
        return len(self.wants)

    @property
    def k_packets(self) -> int:
        return len(self.wants[0])

    def want_set(self, n: int) -> frozenset[int]:
        return self._want_sets[n]

    def side_info(self, n: int) -> frozenset[int]:
        return self._side_sets[n]

    @property
    def w(self) -> tuple[int, ...]:
        return self._w

    @property
    def total_wants(self) -> int:
        return sum(self.w)

    def active_receivers(self) -> list[int]:
        """Receivers with at least one wanted packet; the rest are ignored."""
        return [n for n, wn in enumerate(self.w) if wn]

    def wanted_packets(self) -> frozenset[int]:
        return frozenset(k for k in range(self.k_packets) if any(row[k] for row in self.wants))

    def u_min(self) -> int:
        return max(self.w)

    def __str__(self):
        return serialize_sfm(self)


@dataclass(frozen=True)
class ChannelSpec:
    erasure_probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.erasure_probs)
        for p in probs:
            if not 0.0 <= p < 1.0:
                raise SfmError(f"erasure probability {p} outside [0, 1)")
        object.__setattr__(self, "erasure_probs", probs)

    @classmethod
    def uniform(cls, n: int, p: float = 0.0) -> "ChannelSpec":
        return cls((p,) * n)

    def __len__(self):
        return len(self.erasure_probs)


def gen_a1(k: int) -> Sfm:
    """One receiver per unordered pair of packets, pairs in lexicographic order."""
    if k < 2:
        raise SfmError("A1 needs K >= 2")
    rows = []
    for i, j in combinations(range(k), 2):
        row = [0] * k
        row[i] = row[j] = 1
        rows.append(row)
    return Sfm.from_rows(rows)


def gen_a2(k: int, m: int) -> Sfm:
    """``m`` singleton wanters per packet, followed by the A1(K) pair rows."""
    if k < 2 or m < 1:
        raise SfmError("A2 needs K >= 2 and m >= 1")
    rows = []
    for p in range(k):
        for _ in range(m):
            row = [0] * k
            row[p] = 1
            rows.append(row)
    rows.extend(gen_a1(k).wants)
    return Sfm.from_rows(rows)


def gen_theorem2() -> Sfm:
    """Two packets, three receivers: one wants each packet, the third wants both."""
    return Sfm.from_rows([[1, 0], [0, 1], [1, 1]])


def gen_theorem5(w1: int, n: int) -> Sfm:
    """Receiver 0 wants packets 0..w1-1; every other receiver one distinct packet."""
    if w1 < 1 or n < 2:
        raise SfmError("need w1 >= 1 and N >= 2")
    k = w1 + n - 1
    rows = [[1] * w1 + [0] * (n - 1)]
    for j in range(1, n):
        row = [0] * k
        row[w1 + j - 1] = 1
        rows.append(row)
    return Sfm.from_rows(rows)


def gen_random(n: int, k: int, p_want: float, seed: int) -> Sfm:
    if not 0.0 < p_want <= 1.0:
        raise SfmError("p_want must be in (0, 1]")
    if n < 1 or k < 1:
        raise SfmError("need N >= 1 and K >= 1")
    rng = random.Random(seed)
    return Sfm.from_rows([[1 if rng.random() < p_want else 0 for _ in range(k)] for _ in range(n)])


def parse_sfm(text: str) -> Sfm:
    rows = []
    width = None
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if any(c not in "01" for c in line):
            raise SfmParseError(lineno, f"non-binary character in {line!r}")
        if width is None:
            width = len(line)
        elif len(line) != width:
            raise SfmParseError(lineno, f"expected {width} columns, got {len(line)}")
        rows.append([int(c) for c in line])
    if not rows:
        raise SfmParseError(1, "no rows")
    return Sfm.from_rows(rows)


def serialize_sfm(sfm: Sfm, header: Sequence[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    lines.extend("".join(str(x) for x in row) for row in sfm.wants)
    return "\n".join(lines) + "\n"


GENERATORS = {
    "a1": (gen_a1, ("k",)),
    "a2": (gen_a2, ("k", "m")),
    "theorem2": (gen_theorem2, ()),
    "theorem5": (gen_theorem5, ("w1", "n")),
    "random": (gen_random, ("n", "k", "p_want", "seed")),
}


def generate(name: str, **params) -> Sfm:
    """Dispatch by generator name; unknown names and missing params raise SfmError."""
    try:
        fn, names = GENERATORS[name]
    except KeyError:
        raise SfmError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None
    missing = [p for p in names if p not in params]
    if missing:
        raise SfmError(f"generator {name!r} needs {missing}")
    extra = set(params) - set(names)
    if extra:
        raise SfmError(f"generator {name!r} does not take {sorted(extra)}")
    return fn(*(params[p] for p in names))

"""Coded-packet generators.

Every scheme exposes ``next_vector(view, rng)`` and returns a length-K
coefficient tuple.  Schemes are per-session objects: halving, MDS and the
partitioned wrapper keep internal cursors.

Scheme strings understood by :func:`parse_scheme`::

    rlnc | mds | uncoded | halving | idnc-greedy
    partitioned:<plan>:<inner>

where ``<plan>`` is ``theorem5`` (largest want set vs. everything else),
``equal<M>`` (wanted packets cut into M contiguous blocks) or an explicit
1-indexed list such as ``1-5/6-54`` or ``1,3/2,4``.
"""

from __future__ import annotations

import functools
import math
import random
from dataclasses import dataclass
from typing import Sequence

from .gf import GaloisField
from .session import FeedbackView
from .sfm import Sfm


class SchemeError(ValueError):
    pass


class CapacityError(SchemeError):
    """The field is too small for the requested number of MDS rows."""


class RlncScheme:
    binary_only = False
    uses_feedback = False

    def __init__(self, k: int, field: GaloisField):
        self.k = k
        self.m = field.m

    def next_vector(self, view: FeedbackView, rng: random.Random):
        bits, k = rng.getrandbits, self.k
        m = self.m
        while True:
            v = tuple([bits(m) for _ in range(k)])
            if any(v):
                return v


@functools.lru_cache(maxsize=4096)
def cauchy_row(field: GaloisField, k: int, t: int) -> tuple:
    x = k + t - 1
    if x >= field.q:
        raise CapacityError(f"GF({field.q}) supports {field.q - k} MDS rows for K={k}; slot {t} requested")
    return tuple(field.inv(x ^ y) for y in range(k))


class MdsScheme:
    """Cauchy rows: slot t sends 1/(x_t + y_k) with x_t = K + t - 1, y_k = k.

    Every square submatrix of a Cauchy matrix is invertible, so any w
    received rows restricted to any w wanted columns decode them, and fewer
    rows never expose a single packet.
    """

    binary_only = False
    uses_feedback = False

    _shared_rows: dict = {}  # (field, k) -> rows computed so far, shared by all sessions

    def __init__(self, k: int, field: GaloisField):
        self.k = k
        self.field = field
        self.sent = 0
        self._rows = self._shared_rows.setdefault((field, k), [])

    def row(self, t: int) -> tuple:
        return cauchy_row(self.field, self.k, t)

    def next_vector(self, view: FeedbackView, rng: random.Random):
        self.sent += 1
        rows = self._rows
        if self.sent > len(rows):
            rows.append(cauchy_row(self.field, self.k, self.sent))
        return rows[self.sent - 1]


class UncodedScheme:
    """Unit vector of the lowest packet wanted by the neediest receiver."""

    binary_only = False
    uses_feedback = True

    def __init__(self, k: int, field: GaloisField):
        self.k = k

    def next_vector(self, view: FeedbackView, rng: random.Random):
        biggest = max(len(r) for r in view.residual)
        if biggest == 0:
            raise SchemeError("no receiver wants anything")
        k = min(min(r) for r in view.residual if len(r) == biggest)
        v = [0] * self.k
        v[k] = 1
        return tuple(v)


class HalvingScheme:
    """XOR the lower half of every group of packets, then split the groups.

    Once every group is a singleton, send the XOR of everything still
    wanted.  On the all-pairs instance this finishes memoryless receivers in
    ceil(log2 K) + 1 slots.
    """

    binary_only = True
    uses_feedback = True

    def __init__(self, k: int, field: GaloisField | None = None):
        self.k = k
        self.groups: list[list[int]] = [list(range(k))]

    def next_vector(self, view: FeedbackView, rng: random.Random):
        v = [0] * self.k
        if any(len(g) > 1 for g in self.groups):
            split = []
            for g in self.groups:
                if len(g) > 1:
                    half = math.ceil(len(g) / 2)
                    for p in g[:half]:
                        v[p] = 1
                    split.extend([g[:half], g[half:]])
                else:
                    split.append(g)
            self.groups = split
        else:
            for p in view.still_wanted():
                v[p] = 1
        return tuple(v)


class IdncGreedyScheme:
    """Greedy instantly-decodable XOR; a heuristic, not an optimal IDNC packet.

    Receivers are visited by descending residual size.  A receiver already
    targeted by the current XOR (exactly one unknown) is counted as served;
    otherwise one of its wanted packets is added if every served receiver
    already knows it.
    """

    binary_only = True
    uses_feedback = True

    def __init__(self, k: int, field: GaloisField | None = None):
        self.k = k

    def next_vector(self, view: FeedbackView, rng: random.Random):
        order = sorted(view.incomplete(), key=lambda n: (-len(view.residual[n]), n))
        if not order:
            raise SchemeError("no receiver wants anything")
        chosen: set[int] = set()
        served: list[int] = []
        for n in order:
            known = view.known[n]
            unknown = chosen - known
            if len(unknown) == 1:
                served.append(n)
            elif not unknown:
                for p in sorted(view.residual[n]):
                    if all(p in view.known[r] for r in served):
                        chosen.add(p)
                        served.append(n)
                        break
        v = [0] * self.k
        for p in chosen:
            v[p] = 1
        return tuple(v)


class ReplayScheme:
    """Sends a fixed list of vectors; used to replay witness schedules."""

    binary_only = False
    uses_feedback = False

    def __init__(self, vectors: Sequence[Sequence[int]]):
        self.vectors = [tuple(v) for v in vectors]
        self.sent = 0

    def next_vector(self, view: FeedbackView, rng: random.Random):
        if self.sent >= len(self.vectors):
            raise SchemeError("replay schedule exhausted")
        self.sent += 1
        return self.vectors[self.sent - 1]


def validate_plan(plan, sfm: Sfm) -> tuple[tuple[int, ...], ...]:
    """Drop empty blocks; require disjoint, in-range blocks covering every wanted packet."""
    blocks = tuple(tuple(b) for b in plan if len(b))
    seen: set[int] = set()
    for b in blocks:
        for p in b:
            if not 0 <= p < sfm.k_packets:
                raise SchemeError(f"packet {p + 1} outside 1..{sfm.k_packets}")
            if p in seen:
                raise SchemeError(f"packet {p + 1} appears in more than one block")
            seen.add(p)
    missing = sfm.wanted_packets() - seen
    if missing:
        raise SchemeError(f"plan does not cover wanted packets {sorted(p + 1 for p in missing)}")
    if not blocks:
        raise SchemeError("empty plan")
    return blocks


def make_theorem5_plan(sfm: Sfm) -> tuple[tuple[int, ...], ...]:
    """Two blocks: the largest want set (lowest receiver on ties) and the rest."""
    w = sfm.w
    if max(w) == 0:
        raise SchemeError("no receiver wants anything")
    n1 = w.index(max(w))
    first = tuple(sorted(sfm.want_set(n1)))
    rest = tuple(p for p in range(sfm.k_packets) if p not in first)
    return tuple(b for b in (first, rest) if b)


def equal_blocks_plan(sfm: Sfm, m: int) -> tuple[tuple[int, ...], ...]:
    """Wanted packets in index order, cut into ``m`` contiguous near-equal blocks."""
    if m < 1:
        raise SchemeError("need at least one block")
    wanted = sorted(sfm.wanted_packets())
    size, extra = divmod(len(wanted), m)
    blocks, start = [], 0
    for i in range(m):
        end = start + size + (1 if i < extra else 0)
        blocks.append(tuple(wanted[start:end]))
        start = end
    return tuple(b for b in blocks if b)


class PartitionedScheme:
    """Runs an inner scheme on one block at a time, in plan order.

    The next block starts only when no receiver wants anything left in the
    current one; coefficients outside the active block are zero.
    """

    def __init__(self, plan, inner: "SchemeSpec", sfm: Sfm, field: GaloisField):
        self.blocks = validate_plan(plan, sfm)
        self.inner_spec = inner
        self.field = field
        self.k = sfm.k_packets
        self.binary_only = inner.binary_only()
        self.uses_feedback = True
        self.active = 0
        self._inner = None
        self._sub_sfms = [
            Sfm.from_rows([[row[p] for p in b] for row in sfm.wants]) for b in self.blocks
        ]

    def _restrict(self, view: FeedbackView, block) -> FeedbackView:
        local = {p: i for i, p in enumerate(block)}
        return FeedbackView(
            slot=view.slot,
            k=len(block),
            residual=tuple(frozenset(local[p] for p in r if p in local) for r in view.residual),
            known=tuple(frozenset(local[p] for p in kn if p in local) for kn in view.known),
        )

    def next_vector(self, view: FeedbackView, rng: random.Random):
        while self.active < len(self.blocks):
            block = set(self.blocks[self.active])
            if any(r & block for r in view.residual):
                break
            self.active += 1
            self._inner = None
        else:
            raise SchemeError("every block is finished")
        block = self.blocks[self.active]
        if self._inner is None:
            self._inner = self.inner_spec.build(self._sub_sfms[self.active], self.field)
        sub = self._inner.next_vector(self._restrict(view, block), rng)
        v = [0] * self.k
        for i, p in enumerate(block):
            v[p] = sub[i]
        return tuple(v)


_SIMPLE = {
    "rlnc": RlncScheme,
    "mds": MdsScheme,
    "uncoded": UncodedScheme,
    "halving": HalvingScheme,
    "idnc-greedy": IdncGreedyScheme,
}


@dataclass(frozen=True)
class SchemeSpec:
    """Picklable description of a scheme; ``build`` makes a fresh instance."""

    name: str
    plan: object = None  # str shorthand or explicit 0-indexed blocks
    inner: "SchemeSpec | None" = None

    def binary_only(self) -> bool:
        if self.name == "partitioned":
            return self.inner.binary_only()
        return _SIMPLE[self.name].binary_only

    def resolve_plan(self, sfm: Sfm):
        plan = self.plan
        if plan == "theorem5":
            return make_theorem5_plan(sfm)
        if isinstance(plan, str) and plan.startswith("equal"):
            return equal_blocks_plan(sfm, int(plan[5:]))
        return plan

    def build(self, sfm: Sfm, field: GaloisField):
        if self.name == "partitioned":
            return PartitionedScheme(self.resolve_plan(sfm), self.inner, sfm, field)
        return _SIMPLE[self.name](sfm.k_packets, field)

    def __str__(self):
        if self.name != "partitioned":
            return self.name
        if isinstance(self.plan, str):
            plan = self.plan
        else:
            plan = "/".join(",".join(str(p + 1) for p in b) for b in self.plan)
        return f"partitioned:{plan}:{self.inner}"


def _parse_plan(text: str):
    if text == "theorem5":
        return text
    if text.startswith("equal"):
        try:
            m = int(text[5:])
        except ValueError:
            raise SchemeError(f"bad block count in {text!r}") from None
        if m < 1:
            raise SchemeError("block count must be positive")
        return text
    blocks = []
    for chunk in text.split("/"):
        block = []
        for item in chunk.split(","):
            item = item.strip()
            if not item:
                continue
            try:
                if "-" in item:
                    lo, hi = (int(x) for x in item.split("-", 1))
                    block.extend(range(lo - 1, hi))
                else:
                    block.append(int(item) - 1)
            except ValueError:
                raise SchemeError(f"bad plan item {item!r}") from None
        if any(p < 0 for p in block):
            raise SchemeError("packet indices in plans are 1-based")
        blocks.append(tuple(block))
    return tuple(blocks)


def parse_scheme(text: str) -> SchemeSpec:
    text = text.strip()
    if text in _SIMPLE:
        return SchemeSpec(text)
    if text.startswith("partitioned:"):
        parts = text.split(":", 2)
        if len(parts) != 3:
            raise SchemeError("expected partitioned:<plan>:<inner>")
        inner = parse_scheme(parts[2])
        if inner.name == "partitioned":
            raise SchemeError("nested partitioning is not supported")
        return SchemeSpec("partitioned", _parse_plan(parts[1]), inner)
    raise SchemeError(f"unknown scheme {text!r}; choose from {sorted(_SIMPLE)} or partitioned:<plan>:<inner>")

"""Exhaustive optimal schedules for tiny, erasure-free instances.

States are multisets of receiver elimination states: receivers with the same
side information and the same received span are interchangeable, so the
search memoizes on the sorted tuple of their signatures.  Finished receivers
drop out of the state.

Coordinates every unfinished receiver already knows are zeroed before a
candidate is tried; this never changes what any receiver can decode, so
candidates that collapse to the same reduced vector are tried once.  Scalar
multiples are likewise redundant, so only vectors whose leading nonzero
coefficient is 1 are enumerated.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

from .gf import EliminationState, GaloisField, get_field
from .sfm import Sfm

MAX_K = 6
MAX_N = 12


class EnvelopeError(ValueError):
    """Instance too large for exhaustive search."""


@dataclass
class OracleResult:
    value: object  # Fraction for APDD, int for completion; None if infeasible
    witness: list = dc_field(default_factory=list)
    nodes: int = 0
    field_order: int = 2
    feasible: bool = True


def _check_envelope(sfm: Sfm):
    if sfm.k_packets > MAX_K or sfm.n_receivers > MAX_N:
        raise EnvelopeError(
            f"exhaustive search supports K <= {MAX_K}, N <= {MAX_N}; "
            f"got K={sfm.k_packets}, N={sfm.n_receivers}"
        )


def _normalized_vectors(field: GaloisField, support: tuple[int, ...], k: int):
    """Nonzero vectors on ``support`` with leading coefficient 1."""
    q = field.q
    for lead in range(len(support)):
        tail = support[lead + 1 :]
        for coeffs in itertools.product(range(q), repeat=len(tail)):
            v = [0] * k
            v[support[lead]] = 1
            for p, c in zip(tail, coeffs):
                v[p] = c
            yield tuple(v)


class _Search:
    def __init__(self, sfm: Sfm, field: GaloisField):
        _check_envelope(sfm)
        self.sfm = sfm
        self.field = field
        self.k = sfm.k_packets
        self.nodes = 0
        self.all_vectors = list(_normalized_vectors(field, tuple(range(self.k)), self.k))
        self.index = {v: i for i, v in enumerate(self.all_vectors)}
        self.start = tuple(
            EliminationState(field, self.k, sfm.side_info(n)) for n in sfm.active_receivers()
        )

    @staticmethod
    def key(states) -> tuple:
        return tuple(sorted(st.signature() for st in states))

    def remaining(self, states) -> int:
        return sum(self.k - len(st.decoded) for st in states)

    def deficit(self, states) -> int:
        """Receptions the neediest receiver still needs."""
        return max((self.k - len(st.side_info) - st.rank for st in states), default=0)

    def delay_bound(self, states) -> int:
        """Sum over receivers of the earliest possible relative decode slots.

        A receiver holding ``e`` undecoded dimensions can decode its i-th
        next packet no earlier than ``max(1, i - e)`` slots from now.
        """
        total = 0
        for st in states:
            r = self.k - len(st.decoded)
            e = st.rank - (len(st.decoded) - len(st.side_info))
            total += sum(max(1, i - e) for i in range(1, r + 1))
        return total

    def canonical(self, v, states) -> tuple:
        known = set(range(self.k))
        for st in states:
            known &= st.decoded
        if not known:
            return v
        out = list(v)
        for p in known:
            out[p] = 0
        if not any(out):
            return tuple(out)
        lead = next(x for x in out if x)
        if lead != 1:
            out = self.field.scale_row(self.field.inv(lead), out)
        return tuple(out)

    def advance(self, states, v):
        nxt = []
        for st in states:
            if st.is_innovative(v):
                st = st.copy()
                st.absorb(v)
                if len(st.decoded) == self.k:
                    continue
            nxt.append(st)
        return tuple(nxt)

    def candidates(self, states, start: int = 0):
        seen = set()
        for i in range(start, len(self.all_vectors)):
            c = self.canonical(self.all_vectors[i], states)
            if not any(c) or c in seen:
                continue
            seen.add(c)
            yield i, c


def min_completion(sfm: Sfm, field: GaloisField | None = None, horizon: int | None = None) -> OracleResult:
    """Fewest erasure-free slots until every receiver holds its wanted packets.

    Full-memory decoding depends only on the set of vectors sent, so
    schedules are explored in nondecreasing vector order.
    """
    field = field or get_field(1)
    if horizon is None:
        horizon = sfm.k_packets + 2
    s = _Search(sfm, field)
    failed: set = set()

    def dfs(states, depth, start):
        s.nodes += 1
        if not states:
            return []
        if s.deficit(states) > depth:
            return None
        memo = (s.key(states), depth, start)
        if memo in failed:
            return None
        for i, v in s.candidates(states, start):
            nxt = s.advance(states, v)
            if s.key(nxt) == s.key(states):
                continue
            tail = dfs(nxt, depth - 1, i)
            if tail is not None:
                return [v] + tail
        failed.add(memo)
        return None

    lower = s.deficit(s.start)
    for depth in range(lower, horizon + 1):
        plan = dfs(s.start, depth, 0)
        if plan is not None:
            return OracleResult(len(plan), plan, s.nodes, field.q)
    return OracleResult(None, [], s.nodes, field.q, feasible=False)


def min_apdd(sfm: Sfm, field: GaloisField | None = None, horizon: int | None = None) -> OracleResult:
    """Smallest overall APDD over erasure-free schedules of at most ``horizon`` slots.

    Cost-to-go counts, for each still-wanted packet, slots until it decodes:
    sending one more slot adds one per outstanding want, so
    ``f(S) = R(S) + min_v f(S after v)``.  Children whose residual delay
    bound cannot beat the incumbent are pruned.
    """
    field = field or get_field(1)
    if horizon is None:
        horizon = sfm.k_packets + 2
    s = _Search(sfm, field)
    memo: dict = {}
    inf = float("inf")

    def solve(states, depth):
        if not states:
            return 0, None
        key = (s.key(states), depth)
        if key in memo:
            return memo[key]
        s.nodes += 1
        if depth == 0 or s.deficit(states) > depth:
            memo[key] = (inf, None)
            return memo[key]
        here = s.remaining(states)
        floor = s.delay_bound(states)
        best, best_v = inf, None
        for _, v in s.candidates(states):
            nxt = s.advance(states, v)
            if here + s.delay_bound(nxt) >= best:
                continue
            if s.key(nxt) == s.key(states):
                continue
            sub, _ = solve(nxt, depth - 1)
            if here + sub < best:
                best, best_v = here + sub, v
                if best <= floor:
                    break
        memo[key] = (best, best_v)
        return memo[key]

    total, _ = solve(s.start, horizon)
    if total == inf:
        return OracleResult(None, [], s.nodes, field.q, feasible=False)
    witness, states, depth = [], s.start, horizon
    while states:
        _, v = solve(states, depth)
        witness.append(v)
        states = s.advance(states, v)
        depth -= 1
    return OracleResult(Fraction(total, sfm.total_wants), witness, s.nodes, field.q)


def min_apdd_receiver(sfm: Sfm, n: int) -> Fraction:
    """(w_n + 1) / 2: serving ``n`` alone, one packet per slot, meets the bound."""
    w = sfm.w[n]
    if not w:
        raise ValueError(f"receiver {n} wants nothing; its APDD is undefined")
    return Fraction(w + 1, 2)

"""Arithmetic over GF(2^m) and incremental Gaussian elimination.

Coding vectors are plain tuples of integers in ``range(q)``.  Packets carry
no payload during simulation: whether a receiver can decode a packet depends
only on the span of the coding vectors it has collected.
"""

from __future__ import annotations

from typing import Iterable, Sequence

CodingVector = tuple  # length-K tuple of field elements

# x^8 + x^4 + x^3 + x + 1 for GF(2^8); the smallest irreducible otherwise.
_DEFAULT_POLY = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    8: 0x11B,
}


class FieldError(ValueError):
    """Operand outside the field or an invalid field definition."""


def _degree(p: int) -> int:
    return p.bit_length() - 1


def _polymod(a: int, b: int) -> int:
    db = _degree(b)
    while a and _degree(a) >= db:
        a ^= b << (_degree(a) - db)
    return a


def is_irreducible(poly: int) -> bool:
    """Trial division by every binary polynomial of degree <= m/2."""
    m = _degree(poly)
    if m < 1:
        return False
    if m == 1:
        return True
    if not poly & 1:
        return False
    for d in range(2, 1 << (m // 2 + 1)):
        if _degree(d) >= 1 and _polymod(poly, d) == 0:
            return False
    return True


def _smallest_irreducible(m: int) -> int:
    for poly in range((1 << m) | 1, 1 << (m + 1), 2):
        if is_irreducible(poly):
            return poly
    raise FieldError(f"no irreducible polynomial of degree {m}")  # unreachable


def peasant_mul(a: int, b: int, poly: int) -> int:
    """Shift-and-add multiplication modulo ``poly``; slow but table-free."""
    m = _degree(poly)
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= poly
    return r


class GaloisField:
    """GF(2^m) with log/antilog tables built from a primitive element."""

    def __init__(self, m: int = 8, poly: int | None = None):
        if not 1 <= m <= 16:
            raise FieldError(f"m must be in 1..16, got {m}")
        if poly is None:
            poly = _DEFAULT_POLY.get(m) or _smallest_irreducible(m)
        if _degree(poly) != m:
            raise FieldError(f"polynomial {poly:#x} does not have degree {m}")
        if not is_irreducible(poly):
            raise FieldError(f"polynomial {poly:#x} is reducible")
        self.m = m
        self.poly = poly
        self.q = 1 << m
        self._build_tables()
        self._insert_memo: dict = {}

    def _build_tables(self):
        q = self.q
        order = q - 1
        for g in range(2 if q > 2 else 1, q):
            exp = [0] * (2 * order)
            x = 1
            for i in range(order):
                exp[i] = x
                x = peasant_mul(x, g, self.poly)
                if x == 1 and i < order - 1:
                    break  # order of g divides q - 1 properly
            else:
                break
        else:  # pragma: no cover - every finite field has a generator
            raise FieldError("no primitive element found")
        for i in range(order, 2 * order):
            exp[i] = exp[i - order]
        log = [0] * q
        for i in range(order):
            log[exp[i]] = i
        self.generator = g
        self._exp = exp
        self._log = log
        self._inv = [0] + [exp[(order - log[a]) % order] for a in range(1, q)]
        # Full product table for small fields; elimination uses it row-wise.
        if q <= 256:
            self._table = [[self._logmul(a, b) for b in range(q)] for a in range(q)]
        else:
            self._table = None

    def _logmul(self, a, b):
        if a == 0 or b == 0:
            return 0
        return self._exp[self._log[a] + self._log[b]]

    def __repr__(self):
        return f"GaloisField(m={self.m}, poly={self.poly:#x})"

    def __eq__(self, other):
        return isinstance(other, GaloisField) and (self.m, self.poly) == (other.m, other.poly)

    def __hash__(self):
        return self.m * 1_000_003 + self.poly

    def __reduce__(self):
        return (GaloisField, (self.m, self.poly))

    def _check(self, *xs):
        for x in xs:
            if not 0 <= x < self.q:
                raise FieldError(f"{x} is not an element of GF({self.q})")

    def add(self, a: int, b: int) -> int:
        self._check(a, b)
        return a ^ b

    sub = add

    def mul(self, a: int, b: int) -> int:
        self._check(a, b)
        return self._logmul(a, b)

    def inv(self, a: int) -> int:
        self._check(a)
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return self._inv[a]

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def arith(self, a: int, b: int, op: str) -> int:
        if op == "add":
            return self.add(a, b)
        if op == "mul":
            return self.mul(a, b)
        raise FieldError(f"unknown operation {op!r}")

    def scale_row(self, c: int, row: Sequence[int]) -> list[int]:
        """``c * row`` elementwise, unchecked."""
        if self._table is not None:
            t = self._table[c]
            return [t[x] for x in row]
        return [self._logmul(c, x) for x in row]

    def elements(self) -> range:
        return range(self.q)


_FIELD_CACHE: dict[tuple[int, int | None], GaloisField] = {}


def get_field(m: int, poly: int | None = None) -> GaloisField:
    """Shared field instances; table construction is not free for m = 8."""
    key = (m, poly)
    if key not in _FIELD_CACHE:
        _FIELD_CACHE[key] = GaloisField(m, poly)
    return _FIELD_CACHE[key]


def field_from_order(q: int) -> GaloisField:
    if q < 2 or q & (q - 1):
        raise FieldError(f"field order must be a power of two, got {q}")
    return get_field(q.bit_length() - 1)


def reduce_by_side_info(v: Sequence[int], side_info: Iterable[int]) -> CodingVector:
    """Zero every coordinate the receiver already holds."""
    out = list(v)
    for k in side_info:
        out[k] = 0
    return tuple(out)


# Cap on cached basis transitions per field; random coding rarely repeats a key.
_INSERT_MEMO_LIMIT = 1 << 16


class EliminationState:
    """Reduced row echelon basis of everything a full-memory receiver heard.

    ``_rows`` maps pivot column -> row tuple with a unit pivot; every other
    row is zero in that column.  A packet ``k`` is decodable exactly when
    ``e_k`` is one of the rows.

    The basis is immutable and shared: inserting a vector swaps in a new
    dict.  Transitions depend only on (side info, basis, vector), so they
    are memoized per field; repeated schedules such as fixed MDS rows then
    cost a dictionary lookup.
    """

    def __init__(self, field: GaloisField, k_dim: int, side_info: Iterable[int] = ()):
        self.field = field
        self.k_dim = k_dim
        self.side_info = frozenset(side_info)
        if self.side_info and (min(self.side_info) < 0 or max(self.side_info) >= k_dim):
            raise FieldError("side information index out of range")
        self._rows: dict[int, tuple] = {}
        self._sig: tuple = ()
        self.decoded: set[int] = set(self.side_info)

    @property
    def rank(self) -> int:
        return len(self._rows)

    @property
    def rows(self) -> list[CodingVector]:
        return [row for _, row in self._sig]

    def copy(self) -> "EliminationState":
        new = EliminationState.__new__(EliminationState)
        new.field = self.field
        new.k_dim = self.k_dim
        new.side_info = self.side_info
        new._rows = self._rows
        new._sig = self._sig
        new.decoded = set(self.decoded)
        return new

    def signature(self) -> tuple:
        """Hashable description of the receiver's knowledge."""
        return (tuple(sorted(self.side_info)), tuple(row for _, row in self._sig))

    def _effective(self, v: Sequence[int]) -> list[int]:
        if len(v) != self.k_dim:
            raise FieldError(f"vector length {len(v)} != K={self.k_dim}")
        out = list(v)
        for k in self.side_info:
            out[k] = 0
        table = self.field._table
        for p, row in self._rows.items():
            c = out[p]
            if c:
                if table is not None:
                    t = table[c]
                    out = [x ^ t[y] for x, y in zip(out, row)]
                else:
                    scaled = self.field.scale_row(c, row)
                    out = [x ^ y for x, y in zip(out, scaled)]
        return out

    def is_innovative(self, v: Sequence[int]) -> bool:
        return any(self._effective(v))

    def absorb(self, v: Sequence[int]) -> frozenset[int]:
        """Insert ``v``; return the packet indices that just became decodable."""
        return self.insert(v)[1]

    def insert(self, v: Sequence[int]) -> tuple[bool, frozenset[int]]:
        """Like :meth:`absorb`, also reporting whether ``v`` raised the rank."""
        if type(v) is not tuple:
            v = tuple(v)
        key = (self.k_dim, self.side_info, self._sig, v)
        memo = self.field._insert_memo
        hit = memo.get(key)
        if hit is None:
            if len(v) != self.k_dim:
                raise FieldError(f"vector length {len(v)} != K={self.k_dim}")
            hit = self._transition(v)
            if len(memo) >= _INSERT_MEMO_LIMIT:
                memo.clear()
            memo[key] = hit
        rows, sig, new = hit
        if rows is None:
            return False, new
        self._rows = rows
        self._sig = sig
        self.decoded |= new
        return True, new

    def _transition(self, v: tuple):
        """(rows, sig, newly decoded) after inserting ``v``; rows is None if dependent."""
        k_dim = self.k_dim
        r = self._effective(v)
        if r.count(0) == k_dim:
            return None, None, frozenset()
        pivot = 0
        while not r[pivot]:
            pivot += 1
        if r[pivot] != 1:
            r = self.field.scale_row(self.field._inv[r[pivot]], r)
        table = self.field._table
        rows = dict(self._rows)
        touched = [pivot]
        for p, row in rows.items():
            c = row[pivot]
            if c:
                if table is not None:
                    t = table[c]
                    rows[p] = tuple([x ^ t[y] for x, y in zip(row, r)])
                else:
                    scaled = self.field.scale_row(c, r)
                    rows[p] = tuple([x ^ y for x, y in zip(row, scaled)])
                touched.append(p)
        rows[pivot] = tuple(r)
        # pivots are nonzero, so a row is e_p iff all other entries vanish
        unit = k_dim - 1
        new = frozenset(p for p in touched if rows[p].count(0) == unit and p not in self.decoded)
        return rows, tuple(sorted(rows.items())), new

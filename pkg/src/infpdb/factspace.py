"""Countable fact families with exact marginals and certified tail bounds.

A family is an explicit finite prefix of ``(fact, p)`` pairs optionally
followed by a geometric tail ``p = first * ratio**(j - start)`` over facts
generated from a template at positions ``j = start, start + 1, ...``.
Family indices are 1-based: the prefix occupies ``1..len(prefix)`` and the
tail continues from there.

The two oracle calls a query-evaluation algorithm needs are
:meth:`FactFamily.marginal_of` and :meth:`FactFamily.total_mass`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

from .core import Elem, Fact, as_rational, elem_eq, elem_tag, format_elem
from .errors import InvalidPdb, InvalidProbability, NonconvergentFamily


class _IndexSlot:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "$i"

    def __reduce__(self):
        return (_IndexSlot, ())


INDEX = _IndexSlot()


@dataclass(frozen=True)
class MassBound:
    """Rational interval ``[lower, upper]``; ``upper is None`` means unbounded."""

    lower: Fraction
    upper: Optional[Fraction]

    def __post_init__(self):
        if self.lower < 0 or (self.upper is not None and self.upper < self.lower):
            raise ValueError(f"malformed bound [{self.lower}, {self.upper}]")

    @classmethod
    def exact(cls, value) -> "MassBound":
        v = Fraction(value)
        return cls(v, v)

    @property
    def is_exact(self) -> bool:
        return self.upper is not None and self.lower == self.upper

    @property
    def finite(self) -> bool:
        return self.upper is not None

    @property
    def value(self) -> Fraction:
        if not self.is_exact:
            raise ValueError(f"bound [{self.lower}, {self.upper}] is not a point")
        return self.lower

    def __contains__(self, x) -> bool:
        return self.lower <= x and (self.upper is None or x <= self.upper)

    def __repr__(self):
        if self.is_exact:
            return f"MassBound({self.lower})"
        return f"MassBound([{self.lower}, {'inf' if self.upper is None else self.upper}])"


@dataclass(frozen=True)
class FactTemplate:
    """Generator ``j -> relation(args)`` with :data:`INDEX` slots replaced by ``j``."""

    relation: str
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if not any(a is INDEX for a in self.args):
            raise ValueError("a fact template needs at least one index slot")
        for a in self.args:
            if a is not INDEX:
                elem_tag(a)

    def fact(self, j: int) -> Fact:
        return Fact(self.relation, (j if a is INDEX else a for a in self.args))

    def position_of(self, f: Fact) -> Optional[int]:
        """The ``j`` with ``fact(j) == f``, or None."""
        if f.relation != self.relation or f.arity != len(self.args):
            return None
        j = None
        for slot, a in zip(self.args, f.args):
            if slot is INDEX:
                if type(a) is not int or (j is not None and a != j):
                    return None
                j = a
            elif not elem_eq(slot, a):
                return None
        return j

    def may_overlap(self, other: "FactTemplate", start: int, other_start: int) -> bool:
        """Whether some ``fact(j)``, ``j >= start``, equals ``other.fact(k)``, ``k >= other_start``."""
        if self.relation != other.relation or len(self.args) != len(other.args):
            return False
        lo_j, lo_k = start, other_start
        # Track equalities j == k + d forced by shared index columns; constants pin j or k.
        pinned_j = pinned_k = None
        diff = None
        for a, b in zip(self.args, other.args):
            if a is INDEX and b is INDEX:
                diff = 0 if diff is None else diff
                if diff != 0:
                    return False
            elif a is INDEX:
                if type(b) is not int or (pinned_j is not None and pinned_j != b):
                    return False
                pinned_j = b
            elif b is INDEX:
                if type(a) is not int or (pinned_k is not None and pinned_k != a):
                    return False
                pinned_k = a
            elif not elem_eq(a, b):
                return False
        if pinned_j is not None and pinned_j < lo_j:
            return False
        if pinned_k is not None and pinned_k < lo_k:
            return False
        if diff == 0:
            if pinned_j is not None and pinned_k is not None:
                return pinned_j == pinned_k
            pin = pinned_j if pinned_j is not None else pinned_k
            return pin is None or pin >= max(lo_j, lo_k)
        return True

    def __repr__(self):
        return f"{self.relation}({', '.join('$i' if a is INDEX else format_elem(a) for a in self.args)})"


@dataclass(frozen=True)
class GeometricTail:
    """Facts ``template.fact(j)`` for ``j >= start`` with value ``first * ratio**(j - start)``.

    ``ratio == 1`` is admitted only to describe the constant (divergent)
    series; validators reject such families.
    """

    template: FactTemplate
    first: Fraction
    ratio: Fraction
    start: int = 1

    def __post_init__(self):
        object.__setattr__(self, "first", as_rational(self.first, "tail first term"))
        object.__setattr__(self, "ratio", as_rational(self.ratio, "tail ratio"))
        if self.first < 0:
            raise InvalidProbability(f"tail first term {self.first} is negative")
        if not 0 < self.ratio <= 1:
            raise ValueError(f"tail ratio {self.ratio} outside (0, 1]")
        if not isinstance(self.start, int) or isinstance(self.start, bool):
            raise TypeError("tail start must be an integer")

    @property
    def converges(self) -> bool:
        return self.ratio < 1 or self.first == 0

    def value(self, j: int) -> Fraction:
        return self.first * self.ratio ** (j - self.start)

    def mass_from(self, j: int) -> Optional[Fraction]:
        """Sum of values at positions ``>= j``; None when infinite."""
        if self.first == 0:
            return Fraction(0)
        if self.ratio == 1:
            return None
        j = max(j, self.start)
        return self.value(j) / (1 - self.ratio)

    def shifted(self, skip: int) -> "GeometricTail":
        """The same tail with its first ``skip`` positions dropped."""
        return GeometricTail(self.template, self.value(self.start + skip), self.ratio, self.start + skip)


class FactFamily:
    """An enumerable family of facts with exact rational values.

    With ``bounded=True`` (the default) values are probabilities in [0, 1];
    rate families for Poisson PDBs pass ``bounded=False``.
    """

    __slots__ = ("prefix", "tail", "bounded", "_lookup")

    def __init__(self, prefix=(), tail: Optional[GeometricTail] = None, bounded: bool = True):
        items = tuple((f, as_rational(p)) for f, p in prefix)
        lookup: dict[Fact, tuple[int, Fraction]] = {}
        for i, (f, p) in enumerate(items, start=1):
            if not isinstance(f, Fact):
                raise TypeError(f"family entries must be facts, got {f!r}")
            if f in lookup:
                raise InvalidPdb(f"fact {f!r} listed twice")
            if p < 0 or (bounded and p > 1):
                raise InvalidProbability(f"value {p} of {f!r} outside {'[0, 1]' if bounded else '[0, inf)'}")
            lookup[f] = (i, p)
        if tail is not None:
            if bounded and tail.first > 1:
                raise InvalidProbability(f"tail first term {tail.first} exceeds 1")
            for f in lookup:
                j = tail.template.position_of(f)
                if j is not None and j >= tail.start:
                    raise InvalidPdb(f"prefix fact {f!r} collides with tail position {j}")
        self.prefix = items
        self.tail = tail
        self.bounded = bounded
        self._lookup = lookup

    @classmethod
    def explicit(cls, pairs, bounded: bool = True) -> "FactFamily":
        return cls(pairs, None, bounded)

    @classmethod
    def geometric(cls, relation: str, first, ratio, start: int = 1, prefix=(), bounded: bool = True) -> "FactFamily":
        """Unary tail ``relation(j)`` with values ``first * ratio**(j - start)``."""
        tail = GeometricTail(FactTemplate(relation, (INDEX,)), first, ratio, start)
        return cls(prefix, tail, bounded)

    # -- enumeration -------------------------------------------------------

    @property
    def is_finite(self) -> bool:
        return self.tail is None

    @property
    def prefix_len(self) -> int:
        return len(self.prefix)

    def __len__(self):
        if self.tail is not None:
            raise TypeError("infinite family has no length")
        return len(self.prefix)

    def _tail_position(self, i: int) -> int:
        return self.tail.start + (i - len(self.prefix) - 1)

    def entry(self, i: int) -> tuple[Fact, Fraction]:
        if i < 1:
            raise IndexError(i)
        if i <= len(self.prefix):
            return self.prefix[i - 1]
        if self.tail is None:
            raise IndexError(i)
        j = self._tail_position(i)
        return self.tail.template.fact(j), self.tail.value(j)

    def fact_at(self, i: int) -> Fact:
        return self.entry(i)[0]

    def value_at(self, i: int) -> Fraction:
        if i <= len(self.prefix):
            return self.prefix[i - 1][1]
        return self.tail.value(self._tail_position(i))

    def entries(self, n: Optional[int] = None) -> Iterator[tuple[Fact, Fraction]]:
        """The first ``n`` entries (all of a finite family when ``n`` is None)."""
        if n is None:
            if self.tail is not None:
                raise TypeError("infinite family: pass n")
            n = len(self.prefix)
        elif self.tail is None:
            n = min(n, len(self.prefix))
        for i in range(1, n + 1):
            yield self.entry(i)

    def index_of(self, f: Fact) -> Optional[int]:
        hit = self._lookup.get(f)
        if hit is not None:
            return hit[0]
        if self.tail is not None:
            j = self.tail.template.position_of(f)
            if j is not None and j >= self.tail.start:
                return len(self.prefix) + (j - self.tail.start) + 1
        return None

    def contains(self, f: Fact) -> bool:
        return self.index_of(f) is not None

    def __contains__(self, f) -> bool:
        return isinstance(f, Fact) and self.contains(f)

    # -- oracle calls --------------------------------------------------------

    def marginal_of(self, f: Fact) -> Fraction:
        hit = self._lookup.get(f)
        if hit is not None:
            return hit[1]
        i = self.index_of(f)
        return Fraction(0) if i is None else self.value_at(i)

    def prefix_mass(self, n: int) -> Fraction:
        """Exact sum of the first ``n`` values."""
        total = sum((p for _, p in self.prefix[:n]), Fraction(0))
        if n > len(self.prefix) and self.tail is not None:
            extra = n - len(self.prefix)
            t = self.tail
            if t.ratio == 1:
                total += t.first * extra
            else:
                total += t.first * (1 - t.ratio ** extra) / (1 - t.ratio)
        return total

    def total_mass(self) -> MassBound:
        head = sum((p for _, p in self.prefix), Fraction(0))
        if self.tail is None:
            return MassBound.exact(head)
        rest = self.tail.mass_from(self.tail.start)
        return MassBound(head, None) if rest is None else MassBound.exact(head + rest)

    def tail_mass(self, n: int) -> MassBound:
        """Bound on the mass of entries with index ``> n``."""
        if n < 0:
            raise ValueError("n must be non-negative")
        k = len(self.prefix)
        head = sum((p for _, p in self.prefix[n:]), Fraction(0))
        if self.tail is None:
            return MassBound.exact(head)
        rest = self.tail.mass_from(self.tail.start + max(0, n - k))
        return MassBound(head, None) if rest is None else MassBound.exact(head + rest)

    def max_value(self) -> Fraction:
        best = max((p for _, p in self.prefix), default=Fraction(0))
        if self.tail is not None:
            best = max(best, self.tail.first)
        return best

    def truncation_index(self, eps) -> int:
        """Smallest ``n`` whose certified tail mass is at most ``eps``."""
        eps = Fraction(eps)
        if eps <= 0:
            raise ValueError("eps must be positive")
        if not self.total_mass().finite:
            raise NonconvergentFamily("the family's total mass is not finite")
        k = len(self.prefix)
        for n in range(k + 1):
            if self.tail_mass(n).upper <= eps:
                return n
        t = self.tail
        # r_{k+m} = first * ratio**m / (1 - ratio); solve for m, then fix up exactly.
        est = math.log(float(eps) * float(1 - t.ratio) / float(t.first)) / math.log(float(t.ratio))
        m = max(0, int(est) - 2)
        while m > 0 and t.mass_from(t.start + m - 1) <= eps:
            m -= 1
        while t.mass_from(t.start + m) > eps:
            m += 1
        return k + m

    # -- derived families ----------------------------------------------------

    def as_rates(self) -> "FactFamily":
        return FactFamily(self.prefix, self.tail, bounded=False)

    def truncated(self, n: int) -> "FactFamily":
        """The finite family of the first ``n`` entries."""
        return FactFamily(list(self.entries(n)), None, self.bounded)

    # -- structure -------------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, FactFamily):
            return NotImplemented
        return (self.prefix, self.tail, self.bounded) == (other.prefix, other.tail, other.bounded)

    def __hash__(self):
        return hash((self.prefix, self.tail, self.bounded))

    def __repr__(self):
        head = ", ".join(f"{f!r}: {p}" for f, p in self.prefix[:6])
        if len(self.prefix) > 6:
            head += ", ..."
        tail = "" if self.tail is None else f" + {self.tail.template!r}*{self.tail.first}*({self.tail.ratio})^(j-{self.tail.start})"
        return f"FactFamily([{head}]{tail})"


def marginal_of(fam: FactFamily, f: Fact) -> Fraction:
    return fam.marginal_of(f)


def total_mass(fam: FactFamily) -> MassBound:
    return fam.total_mass()


def tail_mass(fam: FactFamily, n: int) -> MassBound:
    return fam.tail_mass(n)


def truncation_index(fam: FactFamily, eps) -> int:
    return fam.truncation_index(eps)


def families_may_overlap(a: FactFamily, b: FactFamily) -> bool:
    """Conservative disjointness test between two families' fact sets."""
    for f, _ in a.prefix:
        if b.contains(f):
            return True
    for f, _ in b.prefix:
        if a.contains(f):
            return True
    if a.tail is not None and b.tail is not None:
        return a.tail.template.may_overlap(b.tail.template, a.tail.start, b.tail.start)
    return False

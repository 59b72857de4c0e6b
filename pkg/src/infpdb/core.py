"""Facts, bag instances and explicit finite-world PDBs.

Everything here is exact: probabilities are :class:`fractions.Fraction`
and explicit world lists are canonicalized so that two PDBs with the same
law compare equal.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Union

from .errors import InvalidPdb, InvalidProbability

Elem = Union[int, str, Fraction, float]

# Tag order doubles as the cross-tag sort order for canonical forms.
_TAGS = {int: 0, str: 1, Fraction: 2, float: 3}
TAG_NAMES = {0: "int", 1: "text", 2: "rational", 3: "real"}


def elem_tag(e: Elem) -> int:
    tag = _TAGS.get(type(e))
    if tag is None:
        raise TypeError(f"unsupported universe element {e!r} of type {type(e).__name__}")
    if tag == 3 and math.isnan(e):
        raise ValueError("NaN is not a universe element")
    return tag


def elem_key(e: Elem) -> tuple:
    return (elem_tag(e), e)


def elem_eq(a: Elem, b: Elem) -> bool:
    """Equality of universe elements; elements with different tags are distinct."""
    return elem_tag(a) == elem_tag(b) and a == b


def elem_lt(a: Elem, b: Elem) -> bool:
    ta, tb = elem_tag(a), elem_tag(b)
    if ta != tb:
        raise TypeError(f"cannot order {TAG_NAMES[ta]} against {TAG_NAMES[tb]}")
    return a < b


def format_elem(e: Elem) -> str:
    tag = elem_tag(e)
    if tag == 1:
        return '"' + e.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if tag == 2:
        return f"{e.numerator}/{e.denominator}"
    if tag == 3:
        text = repr(e)
        return text if ("." in text or "e" in text or "inf" in text) else text + ".0"
    return str(e)


def as_rational(x, name: str = "probability") -> Fraction:
    """Coerce ``x`` to an exact rational; binary floats are refused."""
    if isinstance(x, bool):
        raise TypeError(f"{name} must be rational, got bool")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, (str, Decimal)):
        return Fraction(x)
    raise TypeError(f"{name} must be an exact rational (int, Fraction or 'num/den'), got {x!r}")


def as_probability(x) -> Fraction:
    p = as_rational(x)
    if not 0 <= p <= 1:
        raise InvalidProbability(f"probability {p} outside [0, 1]")
    return p


class Fact:
    """A relational atom ``relation(args...)``."""

    __slots__ = ("relation", "args", "key", "_hash")

    def __init__(self, relation: str, args: Iterable[Elem] = ()):
        args = tuple(args)
        self.relation = relation
        self.args = args
        self.key = (relation, len(args), tuple(elem_key(a) for a in args))
        self._hash = hash(self.key)

    @property
    def arity(self) -> int:
        return len(self.args)

    def __eq__(self, other):
        if not isinstance(other, Fact):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return self._hash

    def __lt__(self, other: "Fact") -> bool:
        return self.key < other.key

    def __repr__(self):
        return f"{self.relation}({', '.join(format_elem(a) for a in self.args)})"

    def __reduce__(self):
        return (Fact, (self.relation, self.args))


@dataclass(frozen=True)
class Schema:
    relations: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        rels = dict(self.relations)
        for name, arity in rels.items():
            if not isinstance(arity, int) or arity < 0:
                raise ValueError(f"relation {name} has invalid arity {arity!r}")
        object.__setattr__(self, "relations", rels)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, int]]) -> "Schema":
        rels: dict[str, int] = {}
        for name, arity in pairs:
            if name in rels:
                raise ValueError(f"duplicate relation symbol {name}")
            rels[name] = arity
        return cls(rels)

    def arity(self, relation: str) -> int:
        try:
            return self.relations[relation]
        except KeyError:
            raise ValueError(f"unknown relation {relation}") from None

    def check(self, fact: Fact) -> None:
        if self.arity(fact.relation) != fact.arity:
            raise ValueError(
                f"{fact!r} has {fact.arity} arguments, {fact.relation} expects {self.relations[fact.relation]}"
            )

    def __hash__(self):
        return hash(tuple(sorted(self.relations.items())))


class BagInstance:
    """A finite multiset of facts, immutable and canonically ordered."""

    __slots__ = ("_counts", "_items", "_hash", "_size")

    def __init__(self, counts: Mapping[Fact, int] | None = None):
        clean: dict[Fact, int] = {}
        for f, m in (counts or {}).items():
            if not isinstance(f, Fact):
                raise TypeError(f"bag entries must be facts, got {f!r}")
            if not isinstance(m, int) or m < 0:
                raise ValueError(f"multiplicity of {f!r} must be a non-negative integer")
            if m:
                clean[f] = clean.get(f, 0) + m
        self._items = tuple(sorted(clean.items(), key=lambda it: it[0].key))
        self._counts = dict(self._items)
        self._hash = hash(self._items)
        self._size = sum(clean.values())

    @classmethod
    def of(cls, *facts: Fact) -> "BagInstance":
        return cls(Counter(facts))

    @classmethod
    def from_facts(cls, facts: Iterable[Fact]) -> "BagInstance":
        return cls(Counter(facts))

    def mult(self, f: Fact) -> int:
        return self._counts.get(f, 0)

    def items(self) -> tuple[tuple[Fact, int], ...]:
        return self._items

    def support(self) -> frozenset[Fact]:
        return frozenset(self._counts)

    def is_set(self) -> bool:
        return all(m == 1 for _, m in self._items)

    def dedup(self) -> "BagInstance":
        if self.is_set():
            return self
        return BagInstance({f: 1 for f in self._counts})

    def restrict(self, keep: Callable[[Fact], bool]) -> "BagInstance":
        return BagInstance({f: m for f, m in self._items if keep(f)})

    def adom(self) -> set:
        return {elem_key(a) for f in self._counts for a in f.args}

    def union(self, other: "BagInstance") -> "BagInstance":
        counts = dict(self._counts)
        for f, m in other._items:
            counts[f] = counts.get(f, 0) + m
        return BagInstance(counts)

    __add__ = union

    @property
    def sort_key(self) -> tuple:
        return tuple((f.key, m) for f, m in self._items)

    def __len__(self):
        return self._size

    def __bool__(self):
        return self._size > 0

    def __iter__(self) -> Iterator[Fact]:
        for f, m in self._items:
            for _ in range(m):
                yield f

    def __contains__(self, f) -> bool:
        return f in self._counts

    def __eq__(self, other):
        if not isinstance(other, BagInstance):
            return NotImplemented
        return self._items == other._items

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if not self._items:
            return "{}"
        return "{" + ", ".join(repr(f) for f in self) + "}"


EMPTY = BagInstance()


def bag_union(a: BagInstance, b: BagInstance) -> BagInstance:
    return a.union(b)


class ExplicitWorldPdb:
    """A PDB given by a finite list of worlds with exact probabilities.

    Duplicate worlds are merged and zero-probability worlds dropped, so the
    stored tuple is a canonical form and ``==`` compares laws.
    """

    __slots__ = ("worlds", "_index")

    def __init__(self, worlds: Iterable[tuple[BagInstance, object]], check: bool = True):
        merged: dict[BagInstance, Fraction] = {}
        for world, p in worlds:
            if not isinstance(world, BagInstance):
                raise TypeError(f"worlds must be BagInstance, got {world!r}")
            p = as_rational(p)
            if check and not 0 <= p <= 1:
                raise InvalidProbability(f"world probability {p} outside [0, 1]")
            merged[world] = merged.get(world, Fraction(0)) + p
        if check:
            total = sum(merged.values(), Fraction(0))
            if total != 1:
                raise InvalidPdb(f"world probabilities sum to {total}, not 1")
        self.worlds = tuple(
            sorted(((w, p) for w, p in merged.items() if p), key=lambda wp: wp[0].sort_key)
        )
        self._index = dict(self.worlds)

    @classmethod
    def point(cls, world: BagInstance = EMPTY) -> "ExplicitWorldPdb":
        return cls([(world, 1)])

    def prob(self, world: BagInstance) -> Fraction:
        return self._index.get(world, Fraction(0))

    def event_prob(self, event: Callable[[BagInstance], bool]) -> Fraction:
        return sum((p for w, p in self.worlds if event(w)), Fraction(0))

    def facts(self) -> frozenset[Fact]:
        return frozenset(f for w, _ in self.worlds for f in w.support())

    def is_set_pdb(self) -> bool:
        return all(w.is_set() for w, _ in self.worlds)

    def marginal(self, f: Fact) -> Fraction:
        return self.event_prob(lambda w: f in w)

    def expected_size(self) -> Fraction:
        return sum((len(w) * p for w, p in self.worlds), Fraction(0))

    def condition(self, event: Callable[[BagInstance], bool]) -> "ExplicitWorldPdb":
        mass = self.event_prob(event)
        if mass == 0:
            raise InvalidPdb("conditioning on an event of probability 0")
        return ExplicitWorldPdb((w, p / mass) for w, p in self.worlds if event(w))

    def superpose(self, other: "ExplicitWorldPdb") -> "ExplicitWorldPdb":
        return explicit_superpose(self, other)

    def __len__(self):
        return len(self.worlds)

    def __iter__(self):
        return iter(self.worlds)

    def __eq__(self, other):
        if not isinstance(other, ExplicitWorldPdb):
            return NotImplemented
        return self.worlds == other.worlds

    def __hash__(self):
        return hash(self.worlds)

    def __repr__(self):
        body = ", ".join(f"{w!r}: {p}" for w, p in self.worlds)
        return f"ExplicitWorldPdb({body})"


def marginal(pdb: ExplicitWorldPdb, f: Fact) -> Fraction:
    return pdb.marginal(f)


def expected_size(pdb: ExplicitWorldPdb) -> Fraction:
    return pdb.expected_size()


def expected_size_of(pairs: Iterable[tuple[int, object]]):
    """Partial expected size for a (possibly non-normalized) stream of (size, prob) pairs."""
    total = 0
    for size, p in pairs:
        total += size * p
    return total


def explicit_superpose(a: ExplicitWorldPdb, b: ExplicitWorldPdb) -> ExplicitWorldPdb:
    """Independent superposition: sum of P1(D1)*P2(D2) over pairs with D1 + D2 = D."""
    acc: dict[BagInstance, Fraction] = {}
    for w1, p1 in a.worlds:
        for w2, p2 in b.worlds:
            w = w1.union(w2) if w1 and w2 else (w1 or w2)
            acc[w] = acc.get(w, Fraction(0)) + p1 * p2
    return ExplicitWorldPdb(acc.items())

"""Block-independent-disjoint PDBs.

Each block is a die: it contributes at most one of its facts (or none, with
the block's slack probability), independently of every other block.
Facts with marginal 0 are simply left out of blocks.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numpy as np

from .core import BagInstance, ExplicitWorldPdb, Fact, as_probability, as_rational
from .errors import BlockOverflow, DivergentBlocks, OverlappingBlocks, UnsupportedSubfamilyShape
from .factspace import FactFamily, FactTemplate, GeometricTail, MassBound
from .ti import DEFAULT_DELTA


@dataclass(frozen=True)
class Block:
    facts: tuple  # of (Fact, Fraction)

    def __init__(self, facts):
        object.__setattr__(self, "facts", tuple((f, as_probability(p)) for f, p in facts))

    @property
    def mass(self) -> Fraction:
        return sum((p for _, p in self.facts), Fraction(0))

    @property
    def slack(self) -> Fraction:
        return 1 - self.mass

    def outcomes(self, include_null: bool = False) -> list[tuple[Optional[Fact], Fraction]]:
        """Die faces; ``None`` is the no-fact face. Zero-probability faces
        are dropped unless ``include_null``."""
        faces = [(f, p) for f, p in self.facts if p or include_null]
        if self.slack or include_null:
            faces.append((None, self.slack))
        return faces


@dataclass(frozen=True)
class BlockTail:
    """Blocks ``j = start, start + 1, ...``; block ``j`` holds ``templates[k].fact(j)``
    with probability ``first * ratio**(j - start) * weights[k]``."""

    templates: tuple
    weights: tuple
    first: Fraction
    ratio: Fraction
    start: int = 1

    def __init__(self, templates: Sequence[FactTemplate], weights, first, ratio, start: int = 1):
        object.__setattr__(self, "templates", tuple(templates))
        object.__setattr__(self, "weights", tuple(as_rational(w, "block weight") for w in weights))
        object.__setattr__(self, "first", as_rational(first, "tail first term"))
        object.__setattr__(self, "ratio", as_rational(ratio, "tail ratio"))
        object.__setattr__(self, "start", start)
        if len(self.templates) != len(self.weights) or not self.templates:
            raise ValueError("block tail needs one weight per template")
        if not 0 < self.ratio <= 1:
            raise ValueError(f"tail ratio {self.ratio} outside (0, 1]")

    def nonempty_tail(self) -> GeometricTail:
        """Block-nonempty probabilities as a geometric series."""
        share = sum(self.weights, Fraction(0))
        return GeometricTail(self.templates[0], self.first * share, self.ratio, self.start)

    def block(self, j: int) -> Block:
        scale = self.first * self.ratio ** (j - self.start)
        return Block((t.fact(j), scale * w) for t, w in zip(self.templates, self.weights))


class BidPdb:
    __slots__ = ("blocks", "tail", "_block_of")

    def __init__(self, blocks: Sequence[Block], tail: Optional[BlockTail] = None):
        self.blocks = tuple(blocks)
        self.tail = tail
        self._block_of = {f: b for b, block in enumerate(self.blocks) for f, p in block.facts if p}

    @property
    def is_finite(self) -> bool:
        return self.tail is None

    def marginal(self, f: Fact) -> Fraction:
        b = self._block_of.get(f)
        if b is not None:
            return dict(self.blocks[b].facts)[f]
        if self.tail is not None:
            for t, w in zip(self.tail.templates, self.tail.weights):
                j = t.position_of(f)
                if j is not None and j >= self.tail.start:
                    return self.tail.first * self.tail.ratio ** (j - self.tail.start) * w
        return Fraction(0)

    def nonempty_family(self) -> FactFamily:
        """Per-block ``Pr[block contributes a fact]`` as an (unbounded) family.

        The fact attached to each entry is just a label for the block.
        """
        prefix = [(Fact("_block", (b,)), block.mass) for b, block in enumerate(self.blocks, start=1)]
        tail = None if self.tail is None else self.tail.nonempty_tail()
        return FactFamily(prefix, tail, bounded=False)

    def block_count(self) -> int:
        if self.tail is not None:
            raise TypeError("infinitely many blocks")
        return len(self.blocks)

    def block_at(self, i: int) -> Block:
        """Block with 1-based index ``i`` (prefix first, then tail)."""
        if i <= len(self.blocks):
            return self.blocks[i - 1]
        return self.tail.block(self.tail.start + i - len(self.blocks) - 1)

    def __eq__(self, other):
        if not isinstance(other, BidPdb):
            return NotImplemented
        return (self.blocks, self.tail) == (other.blocks, other.tail)

    def __hash__(self):
        return hash((self.blocks, self.tail))

    def __repr__(self):
        return f"BidPdb({len(self.blocks)} blocks{'' if self.tail is None else ' + tail'})"


def validate_bid(blocks: Sequence, tail: Optional[BlockTail] = None) -> BidPdb:
    blocks = [b if isinstance(b, Block) else Block(b) for b in blocks]
    seen: set[Fact] = set()
    for block in blocks:
        if block.mass > 1:
            raise BlockOverflow(f"block probabilities sum to {block.mass} > 1")
        facts = [f for f, _ in block.facts]
        if len(set(facts)) != len(facts):
            raise OverlappingBlocks("a block lists the same fact twice")
        for f in facts:
            if f in seen:
                raise OverlappingBlocks(f"{f!r} belongs to more than one block")
            seen.add(f)
    if tail is not None:
        share = sum(tail.weights, Fraction(0))
        if tail.first * share > 1 or any(w < 0 for w in tail.weights) or tail.first < 0:
            raise BlockOverflow("tail block probabilities exceed 1")
        pdb = BidPdb(blocks, tail)
        for a, b in itertools.combinations(tail.templates, 2):
            if a.may_overlap(b, tail.start, tail.start):
                raise OverlappingBlocks("tail templates generate a common fact")
        for t in tail.templates:
            for f in seen:
                j = t.position_of(f)
                if j is not None and j >= tail.start:
                    raise OverlappingBlocks(f"prefix fact {f!r} reappears in the tail")
        if not pdb.nonempty_family().total_mass().finite:
            raise DivergentBlocks("block-nonempty probabilities sum to infinity")
        return pdb
    return BidPdb(blocks)


def world_prob_bid(pdb: BidPdb, world: BagInstance) -> Fraction:
    """Product of chosen fact probabilities and slack of the untouched blocks."""
    if not pdb.is_finite:
        raise UnsupportedSubfamilyShape("exact world probabilities need finitely many blocks")
    hits: dict[int, Fact] = {}
    for f, m in world.items():
        b = pdb._block_of.get(f)
        if b is None or m > 1 or b in hits:
            return Fraction(0)
        hits[b] = f
    prob = Fraction(1)
    for b, block in enumerate(pdb.blocks):
        prob *= dict(block.facts)[hits[b]] if b in hits else block.slack
        if not prob:
            break
    return prob


def iter_worlds(pdb: BidPdb, include_null: bool = False) -> Iterator[tuple[BagInstance, Fraction]]:
    """Every combination of die faces, one face per block.

    With ``include_null`` the zero-probability faces are kept too, giving
    exactly ``world_count(pdb)`` combinations.
    """
    if not pdb.is_finite:
        raise UnsupportedSubfamilyShape("world enumeration needs finitely many blocks")
    faces = [block.outcomes(include_null) for block in pdb.blocks]
    for combo in itertools.product(*faces):
        prob = Fraction(1)
        facts = {}
        for f, p in combo:
            prob *= p
            if f is not None:
                facts[f] = 1
        yield BagInstance(facts), prob


def world_count(pdb: BidPdb) -> int:
    n = 1
    for block in pdb.blocks:
        n *= len(block.facts) + 1
    return n


def world_law(pdb: BidPdb) -> ExplicitWorldPdb:
    return ExplicitWorldPdb(iter_worlds(pdb))


def sample_horizon(pdb: BidPdb, delta) -> int:
    if pdb.is_finite:
        return len(pdb.blocks)
    return pdb.nonempty_family().truncation_index(Fraction(delta))


def sample_bid(pdb: BidPdb, rng: np.random.Generator, delta=DEFAULT_DELTA) -> BagInstance:
    return sample_bid_many(pdb, rng, 1, delta)[0]


def sample_bid_many(pdb: BidPdb, rng: np.random.Generator, count: int, delta=DEFAULT_DELTA) -> list[BagInstance]:
    """One categorical draw per block; blocks past the truncation index are skipped."""
    n = sample_horizon(pdb, delta)
    blocks = [pdb.block_at(i) for i in range(1, n + 1)]
    u = rng.random((count, n))
    chosen: list[dict] = [{} for _ in range(count)]
    for col, block in enumerate(blocks):
        if not block.facts:
            continue
        cuts = np.cumsum([float(p) for _, p in block.facts])
        face = np.searchsorted(cuts, u[:, col], side="right")
        for row in np.flatnonzero(face < len(block.facts)):
            chosen[row][block.facts[face[row]][0]] = 1
    return [BagInstance(c) for c in chosen]


def bid_as_superposition(pdb: BidPdb) -> list[ExplicitWorldPdb]:
    """One single-fact-or-empty component per block."""
    if not pdb.is_finite:
        raise UnsupportedSubfamilyShape("needs finitely many blocks")
    if not pdb.blocks:
        return [ExplicitWorldPdb.point()]
    return [
        ExplicitWorldPdb([(BagInstance.of(f) if f is not None else BagInstance(), p) for f, p in block.outcomes()])
        for block in pdb.blocks
    ]


def nonempty_prob(pdb: BidPdb) -> MassBound:
    """``Pr[D != {}] = 1 - prod(slack)``, bracketed when there is a tail."""
    if pdb.is_finite:
        v = Fraction(1)
        for block in pdb.blocks:
            v *= block.slack
        return MassBound.exact(1 - v)
    fam = pdb.nonempty_family()
    n = fam.truncation_index(Fraction(1, 10**12))
    v = Fraction(1)
    for i in range(1, n + 1):
        v *= 1 - fam.value_at(i)
    r = fam.tail_mass(n).upper
    return MassBound(1 - v, min(Fraction(1), 1 - v * (1 - r)))

"""Tuple-independent set PDBs spanned by a fact family and its marginals."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional, Union

import numpy as np

from .core import BagInstance, ExplicitWorldPdb, Fact
from .errors import (
    AlmostSureFact,
    DivergentMarginals,
    FactOutsideFamily,
    InvalidProbability,
    UnsupportedSubfamilyShape,
)
from .factspace import FactFamily, MassBound

DEFAULT_DELTA = 1e-9


@dataclass(frozen=True)
class Cofinite:
    """Index selector: every family index except the listed ones."""

    excluded: frozenset = frozenset()

    def __init__(self, excluded: Iterable[int] = ()):
        object.__setattr__(self, "excluded", frozenset(excluded))

    def __contains__(self, i) -> bool:
        return i not in self.excluded


Keep = Union[Cofinite, Callable[[int], bool], Iterable[int]]


class TiPdb:
    """The unique TI-PDB spanned by ``family``; construct via :func:`validate_ti`."""

    __slots__ = ("family",)

    def __init__(self, family: FactFamily):
        self.family = family

    @property
    def is_finite(self) -> bool:
        return self.family.is_finite

    def marginal(self, f: Fact) -> Fraction:
        return self.family.marginal_of(f)

    def __eq__(self, other):
        if not isinstance(other, TiPdb):
            return NotImplemented
        return self.family == other.family

    def __hash__(self):
        return hash(("ti", self.family))

    def __repr__(self):
        return f"TiPdb({self.family!r})"


def validate_ti(fam: FactFamily) -> TiPdb:
    """A TI-PDB with these marginals exists iff they lie in [0, 1] and sum finitely."""
    if not fam.bounded or any(p > 1 for _, p in fam.prefix) or (fam.tail and fam.tail.first > 1):
        raise InvalidProbability("TI marginals must lie in [0, 1]")
    if not fam.total_mass().finite:
        raise DivergentMarginals(
            "marginals sum to infinity; no tuple-independent PDB has them"
        )
    return TiPdb(fam)


def _finite_probs(pdb: TiPdb) -> list[tuple[Fact, Fraction]]:
    if not pdb.is_finite:
        raise UnsupportedSubfamilyShape("operation needs a finite family")
    return list(pdb.family.prefix)


def world_prob(pdb: TiPdb, world: BagInstance, n_ctx: Optional[int] = None) -> MassBound:
    """Probability of ``world``: exact for finite families, an interval otherwise.

    For an infinite family the product over indices ``<= n_ctx`` is ``v`` and
    the missing factor ``prod(1 - p_i), i > n_ctx`` lies in ``[1 - r_n, 1]``.
    """
    fam = pdb.family
    idx = []
    for f, m in world.items():
        i = fam.index_of(f)
        if i is None:
            raise FactOutsideFamily(f"{f!r} is not in the family")
        if m > 1:
            return MassBound.exact(0)
        idx.append(i)
    present = set(idx)
    top = max(idx, default=0)
    if fam.is_finite:
        n = len(fam.prefix)
    else:
        n = top if n_ctx is None else n_ctx
        if n < top:
            raise ValueError(f"n_ctx={n} is below the largest fact index {top} in the world")
    v = Fraction(1)
    for i in range(1, n + 1):
        p = fam.value_at(i)
        v *= p if i in present else 1 - p
    if fam.is_finite:
        return MassBound.exact(v)
    r = fam.tail_mass(n).upper
    return MassBound(max(Fraction(0), v * (1 - r)), v)


def world_weights(probs: list[Fraction]) -> tuple[list[int], int]:
    """Integer weights of all ``2**k`` worlds over a common denominator.

    Entry ``mask`` holds the numerator for the world containing fact ``i``
    iff bit ``i`` of ``mask`` is set.
    """
    denom = 1
    for p in probs:
        denom *= p.denominator
    weights = [1]
    for i, p in enumerate(probs):
        yes = p.numerator
        no = p.denominator - p.numerator
        weights = [w * no for w in weights] + [w * yes for w in weights]
    return weights, denom


def world_law(pdb: TiPdb) -> ExplicitWorldPdb:
    """Explicit world list of a finite TI-PDB (``2**k`` worlds)."""
    entries = _finite_probs(pdb)
    facts = [f for f, _ in entries]
    weights, denom = world_weights([p for _, p in entries])
    worlds = []
    for mask, w in enumerate(weights):
        if w:
            worlds.append((BagInstance({facts[i]: 1 for i in range(len(facts)) if mask >> i & 1}), Fraction(w, denom)))
    return ExplicitWorldPdb(worlds)


def iter_worlds(pdb: TiPdb) -> Iterator[tuple[BagInstance, Fraction]]:
    """Worlds with positive probability, lazily; probabilities are exact."""
    entries = _finite_probs(pdb)
    facts = [f for f, _ in entries]
    weights, denom = world_weights([p for _, p in entries])
    for mask, w in enumerate(weights):
        if w:
            yield BagInstance({facts[i]: 1 for i in range(len(facts)) if mask >> i & 1}), Fraction(w, denom)


def sample_horizon(pdb: TiPdb, delta) -> int:
    fam = pdb.family
    if fam.is_finite:
        return len(fam.prefix)
    return fam.truncation_index(Fraction(delta))


def sample_masks(pdb: TiPdb, rng: np.random.Generator, count: int, delta=DEFAULT_DELTA):
    """``count`` draws as a boolean matrix over the first ``n`` facts.

    Facts beyond the truncation index are never drawn; by the union bound
    the total-variation error is at most ``delta``.
    """
    n = sample_horizon(pdb, delta)
    entries = list(pdb.family.entries(n))
    probs = np.array([float(p) for _, p in entries])
    draws = rng.random((count, n)) < probs
    return [f for f, _ in entries], draws


def sample_ti(pdb: TiPdb, rng: np.random.Generator, delta=DEFAULT_DELTA) -> BagInstance:
    facts, draws = sample_masks(pdb, rng, 1, delta)
    return BagInstance({f: 1 for f, hit in zip(facts, draws[0]) if hit})


def sample_ti_many(pdb: TiPdb, rng: np.random.Generator, count: int, delta=DEFAULT_DELTA) -> list[BagInstance]:
    facts, draws = sample_masks(pdb, rng, count, delta)
    return [BagInstance({facts[i]: 1 for i in np.flatnonzero(row)}) for row in draws]


def _selector(keep: Keep):
    if isinstance(keep, Cofinite):
        return keep.__contains__, None
    if callable(keep):
        return keep, None
    chosen = frozenset(keep)
    return chosen.__contains__, chosen


def restrict_ti(pdb: TiPdb, keep: Keep, allow_almost_sure: bool = False) -> TiPdb:
    """TI-PDB over the kept sub-family; equals conditioning on worlds inside it.

    ``keep`` selects family indices: a finite collection, a :class:`Cofinite`
    complement of a finite set, or (finite families only) a predicate.
    Dropping a fact of probability 1 makes that conditioning undefined and
    raises :class:`AlmostSureFact` unless ``allow_almost_sure``.
    """
    fam = pdb.family
    refuse = (lambda values: None) if allow_almost_sure else _refuse_almost_sure
    test, chosen = _selector(keep)
    if fam.is_finite:
        kept, dropped = [], []
        for i, (f, p) in enumerate(fam.prefix, start=1):
            (kept if test(i) else dropped).append((f, p))
        refuse(p for _, p in dropped)
        return TiPdb(FactFamily(kept, None, fam.bounded))
    k = len(fam.prefix)
    if chosen is not None:
        top = max(chosen, default=0)
        kept = [fam.entry(i) for i in sorted(chosen) if i >= 1]
        dropped = (fam.value_at(i) for i in range(1, max(top, k + 1) + 1) if i not in chosen)
        refuse(dropped)
        return TiPdb(FactFamily(kept, None, fam.bounded))
    if not isinstance(keep, Cofinite):
        raise UnsupportedSubfamilyShape(
            "an infinite family can only be restricted to a finite index set or a cofinite one"
        )
    top = max(max(keep.excluded, default=0), k)
    kept = [fam.entry(i) for i in range(1, top + 1) if i not in keep.excluded]
    refuse(fam.value_at(i) for i in keep.excluded if i >= 1)
    tail = fam.tail.shifted(top - k)
    return TiPdb(FactFamily(kept, tail, fam.bounded))


def _refuse_almost_sure(dropped_values) -> None:
    if any(p == 1 for p in dropped_values):
        raise AlmostSureFact(
            "a dropped fact has probability 1, so the kept sub-space has probability 0"
        )


def expected_size_ti(pdb: TiPdb) -> MassBound:
    return pdb.family.total_mass()


def empty_world_prob(pdb: TiPdb) -> MassBound:
    """``Pr[D = {}] = prod(1 - p_i)``, bracketed for infinite families."""
    return world_prob(pdb, BagInstance(), None if pdb.is_finite else _bracket_horizon(pdb))


def _bracket_horizon(pdb: TiPdb, tol: Fraction = Fraction(1, 10**12)) -> int:
    return pdb.family.truncation_index(tol)

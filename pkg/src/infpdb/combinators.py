"""Superposition, decomposition and completion of PDBs.

Also hosts the model-generic helpers (:func:`nonempty_prob`,
:func:`to_explicit`, :func:`sample_many`) that dispatch over every model
type, since a superposition may hold any of them.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import bid as bid_mod
from . import poisson as poisson_mod
from . import ti as ti_mod
from .bid import BidPdb
from .continuous import PiecewiseIntensity, points_to_bag, sample_point_sets
from .core import BagInstance, ExplicitWorldPdb, Fact, as_rational, explicit_superpose
from .errors import (
    DivergentComponents,
    NotACompletion,
    OverlappingFactSets,
    PdbError,
    PreconditionViolated,
    UnsupportedSubfamilyShape,
)
from .factspace import FactFamily, GeometricTail, MassBound, families_may_overlap
from .poisson import PoissonPdb
from .ti import DEFAULT_DELTA, Cofinite, TiPdb, restrict_ti, validate_ti

Model = Union[TiPdb, BidPdb, PoissonPdb, ExplicitWorldPdb, "SuperposedPdb"]

_BRACKET_TOL = Fraction(1, 10**12)


@dataclass(frozen=True)
class Component:
    model: object
    nonempty_prob: MassBound


class SuperposedPdb:
    """Independent superposition of finitely many components, optionally
    followed by countably many single-fact TI components given by ``tail``."""

    __slots__ = ("components", "tail")

    def __init__(self, components: Sequence[Component], tail: Optional[GeometricTail] = None):
        self.components = tuple(components)
        self.tail = tail

    @property
    def models(self) -> list:
        return [c.model for c in self.components]

    def tail_pdb(self) -> Optional[TiPdb]:
        return None if self.tail is None else TiPdb(FactFamily((), self.tail))

    def __eq__(self, other):
        if not isinstance(other, SuperposedPdb):
            return NotImplemented
        return (self.models, self.tail) == (other.models, other.tail)

    def __hash__(self):
        return hash((tuple(self.models), self.tail))

    def __repr__(self):
        extra = "" if self.tail is None else " + single-fact tail"
        return f"SuperposedPdb({len(self.components)} components{extra})"


# -- model-generic helpers ---------------------------------------------------------


def _ti_nonempty(pdb: TiPdb) -> MassBound:
    empty = ti_mod.empty_world_prob(pdb)
    return MassBound(1 - empty.upper, 1 - empty.lower)


def nonempty_prob(model) -> MassBound:
    """``Pr[D != {}]`` for any model, as a rational bracket."""
    if isinstance(model, ExplicitWorldPdb):
        return MassBound.exact(1 - model.prob(BagInstance()))
    if isinstance(model, TiPdb):
        return _ti_nonempty(model)
    if isinstance(model, BidPdb):
        return bid_mod.nonempty_prob(model)
    if isinstance(model, PoissonPdb):
        return poisson_mod.nonempty_prob(model)
    if isinstance(model, PiecewiseIntensity):
        return poisson_mod.nonempty_prob_of_total(model.total)
    if isinstance(model, SuperposedPdb):
        lo_empty = hi_empty = Fraction(1)
        for c in model.components:
            lo_empty *= 1 - c.nonempty_prob.upper
            hi_empty *= 1 - c.nonempty_prob.lower
        if model.tail is not None:
            t = _ti_nonempty(model.tail_pdb())
            lo_empty *= 1 - t.upper
            hi_empty *= 1 - t.lower
        return MassBound(1 - hi_empty, 1 - lo_empty)
    raise TypeError(f"not a PDB model: {model!r}")


def is_finite(model) -> bool:
    if isinstance(model, ExplicitWorldPdb):
        return True
    if isinstance(model, (TiPdb, BidPdb)):
        return model.is_finite
    if isinstance(model, SuperposedPdb):
        return model.tail is None and all(is_finite(m) for m in model.models)
    return False


def world_count(model) -> int:
    """Number of worlds brute-force enumeration of ``model`` visits."""
    if isinstance(model, ExplicitWorldPdb):
        return len(model)
    if isinstance(model, TiPdb):
        return 2 ** len(model.family.prefix)
    if isinstance(model, BidPdb):
        return bid_mod.world_count(model)
    if isinstance(model, SuperposedPdb):
        n = 1
        for m in model.models:
            n *= world_count(m)
        return n
    raise UnsupportedSubfamilyShape(f"{type(model).__name__} has infinitely many worlds")


def iter_worlds(model):
    """Exact ``(world, probability)`` pairs of a finite model, possibly with repeats."""
    if isinstance(model, ExplicitWorldPdb):
        return iter(model.worlds)
    if isinstance(model, TiPdb):
        return ti_mod.iter_worlds(model)
    if isinstance(model, BidPdb):
        return bid_mod.iter_worlds(model)
    if isinstance(model, SuperposedPdb):
        return iter(to_explicit(model).worlds)
    raise UnsupportedSubfamilyShape(f"{type(model).__name__} has infinitely many worlds")


def to_explicit(model) -> ExplicitWorldPdb:
    """Explicit world law of a finite model."""
    if isinstance(model, ExplicitWorldPdb):
        return model
    if isinstance(model, TiPdb):
        return ti_mod.world_law(model)
    if isinstance(model, BidPdb):
        return bid_mod.world_law(model)
    if isinstance(model, SuperposedPdb):
        if model.tail is not None:
            raise UnsupportedSubfamilyShape("a superposition with an infinite tail has infinitely many worlds")
        law = ExplicitWorldPdb.point()
        for m in model.models:
            law = explicit_superpose(law, to_explicit(m))
        return law
    raise UnsupportedSubfamilyShape(f"{type(model).__name__} has infinitely many worlds")


def substream(root: int, index: int) -> np.random.Generator:
    """Random stream for component ``index`` derived from ``root``."""
    return np.random.default_rng(np.random.SeedSequence(root, spawn_key=(index,)))


def _sample_explicit(pdb: ExplicitWorldPdb, rng: np.random.Generator, count: int) -> list[BagInstance]:
    worlds = [w for w, _ in pdb.worlds]
    cuts = np.cumsum([float(p) for _, p in pdb.worlds])
    picks = np.searchsorted(cuts, rng.random(count) * cuts[-1], side="right")
    return [worlds[min(i, len(worlds) - 1)] for i in picks]


def sample_many(model, rng: np.random.Generator, count: int, delta=DEFAULT_DELTA) -> list[BagInstance]:
    """``count`` independent draws; total-variation error at most ``delta`` per draw."""
    if isinstance(model, ExplicitWorldPdb):
        return _sample_explicit(model, rng, count)
    if isinstance(model, TiPdb):
        return ti_mod.sample_ti_many(model, rng, count, delta)
    if isinstance(model, BidPdb):
        return bid_mod.sample_bid_many(model, rng, count, delta)
    if isinstance(model, PoissonPdb):
        return poisson_mod.sample_poisson_many(model, rng, count, delta)
    if isinstance(model, PiecewiseIntensity):
        return [points_to_bag(model.relation, pts) for pts in sample_point_sets(model, rng, count)]
    if isinstance(model, SuperposedPdb):
        root = int(rng.integers(2**63))
        parts = list(model.models)
        if model.tail is not None:
            parts.append(model.tail_pdb())
        share = Fraction(delta) / max(1, len(parts))
        out = [BagInstance()] * count
        for i, m in enumerate(parts):
            draws = sample_many(m, substream(root, i), count, share)
            out = [a.union(b) if b else a for a, b in zip(out, draws)]
        return out
    raise TypeError(f"not a PDB model: {model!r}")


def sample(model, rng: np.random.Generator, delta=DEFAULT_DELTA) -> BagInstance:
    return sample_many(model, rng, 1, delta)[0]


# -- superposition ------------------------------------------------------------------


def superpose(components: Sequence, tail: Optional[GeometricTail] = None) -> SuperposedPdb:
    """Superposition of ``components`` and, optionally, one single-fact TI
    component per fact of ``tail``. Valid iff the nonempty probabilities sum finitely."""
    comps = [c if isinstance(c, Component) else Component(c, nonempty_prob(c)) for c in components]
    if tail is not None:
        if tail.first > 1:
            raise PdbError("single-fact component probabilities must lie in [0, 1]")
        if tail.mass_from(tail.start) is None:
            raise DivergentComponents(
                "the components' nonempty probabilities sum to infinity"
            )
    return SuperposedPdb(comps, tail)


def explicit_components(sp: SuperposedPdb) -> list[ExplicitWorldPdb]:
    if sp.tail is not None:
        raise UnsupportedSubfamilyShape("infinitely many components")
    return [to_explicit(m) for m in sp.models]


def decompose_ti(pdb: TiPdb, parts: Sequence) -> list[TiPdb]:
    """Split a TI-PDB into TI-PDBs over a partition of its index set.

    For an infinite family exactly one part must be a :class:`Cofinite`
    selector (or the string ``"rest"``), covering every index not listed
    elsewhere.
    """
    fam = pdb.family
    finite_parts = [frozenset(p) for p in parts if not _is_rest(p)]
    rest = [p for p in parts if _is_rest(p)]
    listed: set[int] = set()
    for p in finite_parts:
        if listed & p:
            raise PreconditionViolated("parts overlap")
        listed |= p
    if len(rest) > 1:
        raise PreconditionViolated("at most one part may cover the remaining indices")
    if rest:
        complement = Cofinite(listed)
        if isinstance(rest[0], Cofinite) and rest[0] != complement:
            raise PreconditionViolated("the cofinite part must be the complement of the other parts")
        selectors = [p for p in finite_parts] + [complement]
        order = [i for i, p in enumerate(parts) if not _is_rest(p)] + [next(i for i, p in enumerate(parts) if _is_rest(p))]
    else:
        if not fam.is_finite:
            raise UnsupportedSubfamilyShape("an infinite family needs a cofinite part")
        if listed != set(range(1, len(fam.prefix) + 1)):
            raise PreconditionViolated("parts do not cover the family exactly")
        selectors, order = finite_parts, list(range(len(parts)))
    pieces = [restrict_ti(pdb, sel, allow_almost_sure=True) for sel in selectors]
    out: list[Optional[TiPdb]] = [None] * len(parts)
    for slot, piece in zip(order, pieces):
        out[slot] = piece
    return out


def _is_rest(part) -> bool:
    return isinstance(part, Cofinite) or (isinstance(part, str) and part == "rest")


# -- independence ---------------------------------------------------------------------


@dataclass
class IndependenceReport:
    component_probs: list          # P_i(E_i) in the component
    superposed_probs: list         # P(E_i) in the superposition
    subsets: list                  # (indices, joint, product of marginals)
    holds: bool


def check_component_independence(sp: SuperposedPdb, events: Sequence[Optional[Callable[[BagInstance], bool]]]) -> IndependenceReport:
    """Brute-force check that events owned by distinct components keep their
    probability and are mutually independent in the superposition.

    ``events[i]`` is a predicate on worlds (``None`` for no event). Each event
    must be decided by its own component's facts, which in turn must be
    disjoint from the other event-carrying components' facts.
    """
    laws = explicit_components(sp)
    if len(events) != len(laws):
        raise ValueError("need one event slot per component")
    active = [i for i, e in enumerate(events) if e is not None]
    fact_sets = [laws[i].facts() for i in range(len(laws))]
    for a, b in itertools.combinations(active, 2):
        if fact_sets[a] & fact_sets[b]:
            raise PreconditionViolated(f"components {a} and {b} share facts")
    joint_law = to_explicit(sp)
    for i in active:
        own = fact_sets[i]
        for w, _ in joint_law.worlds:
            if events[i](w) != events[i](w.restrict(own.__contains__)):
                raise PreconditionViolated(f"event {i} depends on facts outside component {i}")
    comp_probs = [laws[i].event_prob(events[i]) for i in active]
    sup_probs = [joint_law.event_prob(events[i]) for i in active]
    subsets = []
    holds = comp_probs == sup_probs
    for size in range(2, len(active) + 1):
        for combo in itertools.combinations(range(len(active)), size):
            joint = joint_law.event_prob(lambda w, c=combo: all(events[active[j]](w) for j in c))
            product = Fraction(1)
            for j in combo:
                product *= sup_probs[j]
            subsets.append((tuple(active[j] for j in combo), joint, product))
            holds = holds and joint == product
    return IndependenceReport(comp_probs, sup_probs, subsets, holds)


# -- completions ----------------------------------------------------------------------


def ti_completion(base: TiPdb, extension: FactFamily) -> SuperposedPdb:
    """``base`` superposed with the TI-PDB of ``extension``.

    The result conditions back to ``base`` exactly iff the extension's empty
    world has positive probability, i.e. every extension marginal is below 1.
    """
    ext = validate_ti(extension)
    if any(p == 1 for _, p in extension.prefix) or (extension.tail is not None and extension.tail.first == 1):
        raise NotACompletion("an extension fact has probability 1, so the base worlds have probability 0")
    if families_may_overlap(base.family, extension):
        raise OverlappingFactSets("extension facts must be disjoint from the base facts")
    return superpose([base, ext])


def lambda_completion_check(base: TiPdb, extension: FactFamily, lambda_cap) -> bool:
    """Whether ``extension`` yields a TI-completion with all new marginals ``<= lambda_cap``."""
    cap = as_rational(lambda_cap, "lambda")
    if extension.max_value() > cap:
        return False
    try:
        ti_completion(base, extension)
    except PdbError:
        return False
    return True


def _inside(facts: frozenset) -> Callable[[BagInstance], bool]:
    return lambda w: w.is_set() and w.support() <= facts


def verify_completion(base: ExplicitWorldPdb, candidate: ExplicitWorldPdb, base_facts=None) -> bool:
    """Whether ``candidate`` conditioned on the base sample space equals ``base``."""
    facts = frozenset(base.facts() if base_facts is None else base_facts)
    inside = _inside(facts)
    if candidate.event_prob(inside) == 0:
        return False
    return candidate.condition(inside) == base


def split_disjoint_superposition(candidate: ExplicitWorldPdb, facts) -> Optional[tuple[ExplicitWorldPdb, ExplicitWorldPdb]]:
    """Factor ``candidate`` as ``A + B`` with ``A`` over ``facts`` and ``B`` over the rest.

    Such a factorization is forced to use the two marginal laws; returns them
    when their superposition reproduces ``candidate`` and None otherwise.
    """
    facts = frozenset(facts)
    left: dict[BagInstance, Fraction] = {}
    right: dict[BagInstance, Fraction] = {}
    for w, p in candidate.worlds:
        a = w.restrict(facts.__contains__)
        b = w.restrict(lambda f: f not in facts)
        left[a] = left.get(a, Fraction(0)) + p
        right[b] = right.get(b, Fraction(0)) + p
    a_law, b_law = ExplicitWorldPdb(left.items()), ExplicitWorldPdb(right.items())
    if explicit_superpose(a_law, b_law) != candidate:
        return None
    return a_law, b_law

"""Countable Poisson bag-PDBs: every fact's multiplicity is an independent
Poisson variable with its own rate."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple

import mpmath
import numpy as np

from .core import BagInstance, ExplicitWorldPdb, Fact
from .errors import AlmostSureFact, DivergentRates, FactOutsideFamily, UnsupportedSubfamilyShape
from .factspace import FactFamily, MassBound
from .ti import DEFAULT_DELTA, TiPdb

# bag_world_prob evaluates in 30 significant digits and rounds once.
REL_ERROR_BOUND = 2.0 ** -52


class Estimate(NamedTuple):
    value: float
    rel_error: float


class PoissonPdb:
    __slots__ = ("rates",)

    def __init__(self, rates: FactFamily):
        self.rates = rates

    @property
    def is_finite(self) -> bool:
        return self.rates.is_finite

    def rate(self, f: Fact) -> Fraction:
        return self.rates.marginal_of(f)

    def total_rate(self) -> MassBound:
        return self.rates.total_mass()

    def marginal(self, f: Fact) -> float:
        """``Pr[mult(f) > 0] = 1 - exp(-rate)``."""
        return -math.expm1(-float(self.rate(f)))

    def __eq__(self, other):
        if not isinstance(other, PoissonPdb):
            return NotImplemented
        return self.rates == other.rates

    def __hash__(self):
        return hash(("poisson", self.rates))

    def __repr__(self):
        return f"PoissonPdb({self.rates!r})"


def validate_poisson(rates: FactFamily) -> PoissonPdb:
    """A Poisson PDB with these rates exists iff the rates sum finitely."""
    if rates.bounded:
        rates = rates.as_rates()
    if not rates.total_mass().finite:
        raise DivergentRates("rates sum to infinity; no Poisson PDB has them")
    return PoissonPdb(rates)


def bag_world_prob(pdb: PoissonPdb, world: BagInstance) -> Estimate:
    """``exp(-sum rates) * prod(rate**k / k!)`` for a finite rate list."""
    if not pdb.is_finite:
        raise UnsupportedSubfamilyShape("bag world probabilities need a finite rate list")
    with mpmath.workdps(30):
        acc = mpmath.exp(-_mp(pdb.total_rate().value))
        for f, k in world.items():
            if not pdb.rates.contains(f):
                raise FactOutsideFamily(f"{f!r} has no rate")
            lam = _mp(pdb.rate(f))
            acc *= lam ** k / mpmath.factorial(k)
        return Estimate(float(acc), REL_ERROR_BOUND)


def _mp(q: Fraction):
    return mpmath.mpf(q.numerator) / q.denominator


def single_fact_pmf(rate, k: int) -> float:
    lam = float(rate)
    if lam == 0:
        return 1.0 if k == 0 else 0.0
    return math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1))


def sample_horizon(pdb: PoissonPdb, delta) -> int:
    # Pr[some fact past n appears] <= sum(1 - exp(-rate)) <= sum(rate)
    if pdb.is_finite:
        return len(pdb.rates.prefix)
    return pdb.rates.truncation_index(Fraction(delta))


def sample_counts(pdb: PoissonPdb, rng: np.random.Generator, count: int, delta=DEFAULT_DELTA):
    n = sample_horizon(pdb, delta)
    entries = list(pdb.rates.entries(n))
    lams = np.array([float(r) for _, r in entries])
    return [f for f, _ in entries], rng.poisson(lams, size=(count, n))


def sample_poisson(pdb: PoissonPdb, rng: np.random.Generator, delta=DEFAULT_DELTA) -> BagInstance:
    return sample_poisson_many(pdb, rng, 1, delta)[0]


def sample_poisson_many(pdb: PoissonPdb, rng: np.random.Generator, count: int, delta=DEFAULT_DELTA) -> list[BagInstance]:
    facts, counts = sample_counts(pdb, rng, count, delta)
    return [BagInstance({facts[i]: int(row[i]) for i in np.flatnonzero(row)}) for row in counts]


def rate_for_marginal(p) -> Fraction:
    """``-ln(1 - p)``, rounded to the nearest double and stored exactly."""
    p = Fraction(p)
    if p >= 1:
        raise AlmostSureFact("a fact with probability 1 has no finite Poisson rate")
    return Fraction(-math.log1p(-float(p))) if p else Fraction(0)


def dedup_rates_from_marginals(ti: TiPdb) -> PoissonPdb:
    """Poisson PDB whose deduplication is ``ti`` (finite families)."""
    if not ti.is_finite:
        raise UnsupportedSubfamilyShape("rates of an infinite family have no certified tail shape")
    rates = [(f, rate_for_marginal(p)) for f, p in ti.family.prefix]
    return PoissonPdb(FactFamily(rates, None, bounded=False))


def split_almost_sure(ti: TiPdb) -> tuple[PoissonPdb, ExplicitWorldPdb]:
    """Decompose a finite TI-PDB as ``dedup(Poisson) + point mass on its sure facts``."""
    if not ti.is_finite:
        raise UnsupportedSubfamilyShape("needs a finite family")
    sure = [f for f, p in ti.family.prefix if p == 1]
    rest = FactFamily([(f, p) for f, p in ti.family.prefix if p < 1])
    return dedup_rates_from_marginals(TiPdb(rest)), ExplicitWorldPdb.point(BagInstance.from_facts(sure))


def dedup(world: BagInstance) -> BagInstance:
    return world.dedup()


def nonempty_prob(pdb: PoissonPdb) -> MassBound:
    return nonempty_prob_of_total(pdb.total_rate().upper)


def nonempty_prob_of_total(total) -> MassBound:
    """``1 - exp(-total)`` bracketed by rationals."""
    total = Fraction(total)
    if total == 0:
        return MassBound.exact(0)
    with mpmath.workdps(40):
        v = Fraction(float(1 - mpmath.exp(-_mp(total))))
    slack = Fraction(1, 10**15)
    return MassBound(max(Fraction(0), v - slack), min(Fraction(1), v + slack))

"""Probabilistic query evaluation: exact enumeration, Monte Carlo, and the
additive approximation for countable TI-PDBs.

No operation here claims a *relative* error guarantee. For countable
TI-PDBs none is possible in general: multiplicative approximation of
``Pr[D |= q]`` is not computable for FO queries, so only additive
certificates are offered.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from . import combinators
from .bid import BidPdb
from .combinators import SuperposedPdb, substream
from .core import BagInstance, ExplicitWorldPdb
from .errors import ModeMismatch, WorldBudgetExceeded
from .query import Query, parse_query
from .ti import TiPdb, restrict_ti, sample_masks, world_weights

DEFAULT_WORLD_BUDGET = 2**24
BUDGET_ENV = "INFPDB_WORLD_BUDGET"
MC_CHUNK = 4096


def world_budget() -> int:
    raw = os.environ.get(BUDGET_ENV)
    return int(raw) if raw else DEFAULT_WORLD_BUDGET


@dataclass
class PqeResult:
    value: Union[Fraction, float]
    error_kind: str                      # "exact" | "additive" | "hoeffding"
    eps: Optional[Fraction | float] = None
    confidence: Optional[float] = None
    worlds_enumerated: Optional[int] = None
    samples_drawn: Optional[int] = None
    certificate: dict = field(default_factory=dict)

    @property
    def interval(self) -> tuple[float, float]:
        if self.error_kind == "exact":
            return float(self.value), float(self.value)
        e = float(self.eps)
        return max(0.0, float(self.value) - e), min(1.0, float(self.value) + e)

    def covers(self, truth) -> bool:
        lo, hi = self.interval
        return lo <= float(truth) <= hi


def _as_query(q) -> Query:
    return q if isinstance(q, Query) else parse_query(q)


def _ti_exact(pdb: TiPdb, q: Query, workers: int) -> tuple[Fraction, int]:
    entries = list(pdb.family.prefix)
    facts = [f for f, _ in entries]
    weights, denom = world_weights([p for _, p in entries])
    k = len(facts)

    def run(lo: int, hi: int) -> int:
        acc = 0
        for mask in range(lo, hi):
            w = weights[mask]
            if w and q.holds(BagInstance({facts[i]: 1 for i in range(k) if mask >> i & 1})):
                acc += w
        return acc

    total = len(weights)
    if workers <= 1:
        hits = run(0, total)
    else:
        step = -(-total // workers)
        bounds = [(lo, min(total, lo + step)) for lo in range(0, total, step)]
        with ThreadPoolExecutor(workers) as pool:
            hits = sum(pool.map(lambda b: run(*b), bounds))
    return Fraction(hits, denom), total


def exact_pqe(model, q, budget: Optional[int] = None, workers: int = 1) -> PqeResult:
    """``Pr[D |= q]`` by enumerating every possible world of a finite model."""
    q = _as_query(q)
    budget = world_budget() if budget is None else budget
    if not combinators.is_finite(model):
        raise WorldBudgetExceeded(
            f"{type(model).__name__} has infinitely many worlds; use approx (TI) or mc"
        )
    count = combinators.world_count(model)
    if count > budget:
        raise WorldBudgetExceeded(f"{count} worlds exceed the budget of {budget}; fall back to mc")
    if isinstance(model, TiPdb):
        value, seen = _ti_exact(model, q, workers)
    else:
        value, seen = Fraction(0), 0
        for world, p in combinators.iter_worlds(model):
            seen += 1
            if q.holds(world):
                value += p
    return PqeResult(value, "exact", worlds_enumerated=seen)


def hoeffding_halfwidth(samples: int, confidence: float) -> float:
    return math.sqrt(math.log(2 / (1 - confidence)) / (2 * samples))


def _count_hits_ti(pdb: TiPdb, q: Query, rng, count: int, delta) -> int:
    facts, draws = sample_masks(pdb, rng, count, delta)
    if not facts:
        return count if q.holds(BagInstance()) else 0
    rows, freq = np.unique(np.packbits(draws, axis=1), axis=0, return_counts=True)
    hits = 0
    for row, c in zip(rows, freq):
        bits = np.unpackbits(row)[: len(facts)]
        if q.holds(BagInstance({facts[i]: 1 for i in np.flatnonzero(bits)})):
            hits += int(c)
    return hits


def _count_hits(model, q: Query, rng, count: int, delta) -> int:
    if isinstance(model, TiPdb):
        return _count_hits_ti(model, q, rng, count, delta)
    cache: dict[BagInstance, bool] = {}
    hits = 0
    for world in combinators.sample_many(model, rng, count, delta):
        hit = cache.get(world)
        if hit is None:
            hit = cache[world] = q.holds(world)
        hits += hit
    return hits


def mc_pqe(model, q, samples: int, confidence: float = 0.99, rng: Optional[np.random.Generator] = None,
           workers: int = 1) -> PqeResult:
    """Empirical frequency of ``q`` over ``samples`` sampled worlds.

    The reported half-width is Hoeffding's ``sqrt(ln(2/(1-c)) / (2n))`` plus
    the sampler's total-variation slack (set to 1/100 of it). Work is split
    into fixed-size chunks with streams derived from one root draw of
    ``rng``, so the result does not depend on ``workers``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    q = _as_query(q)
    rng = np.random.default_rng() if rng is None else rng
    eps = hoeffding_halfwidth(samples, confidence)
    delta = eps / 100
    root = int(rng.integers(2**63))
    chunks = [(i, min(MC_CHUNK, samples - start)) for i, start in enumerate(range(0, samples, MC_CHUNK))]

    def run(chunk):
        i, n = chunk
        return _count_hits(model, q, substream(root, i), n, delta)

    if workers <= 1:
        hits = sum(map(run, chunks))
    else:
        with ThreadPoolExecutor(workers) as pool:
            hits = sum(pool.map(run, chunks))
    return PqeResult(
        hits / samples,
        "hoeffding",
        eps=eps + delta,
        confidence=confidence,
        samples_drawn=samples,
        certificate={"hoeffding_halfwidth": eps, "sampler_delta": delta, "hits": hits},
    )


def approx_pqe(pdb: TiPdb, q, eps, budget: Optional[int] = None, workers: int = 1) -> PqeResult:
    """Additive ``eps``-approximation of ``Pr[D |= q]`` for a TI-PDB.

    Keeps the first ``n`` facts, where ``n`` is the smallest index whose tail
    mass ``r_n`` is at most ``eps``, and answers exactly on that finite
    TI-PDB, which is the original conditioned on worlds inside those facts.
    The conditioning event has probability at least ``1 - r_n``, which
    pins the answer to within ``eps`` of the truth.
    """
    if not isinstance(pdb, TiPdb):
        raise ModeMismatch(f"approx mode needs a TI-PDB, got {type(pdb).__name__}")
    eps = Fraction(eps)
    if not 0 < eps < Fraction(1, 2):
        raise ValueError("eps must lie in (0, 1/2)")
    q = _as_query(q)
    fam = pdb.family
    n = len(fam.prefix) if fam.is_finite else fam.truncation_index(eps)
    r_n = fam.tail_mass(n).upper
    budget = world_budget() if budget is None else budget
    if 2**n > budget:
        raise WorldBudgetExceeded(
            f"truncation keeps {n} facts ({2**n} worlds), over the budget of {budget}; fall back to mc"
        )
    truncated = restrict_ti(pdb, range(1, n + 1))
    inner = exact_pqe(truncated, q, budget, workers)
    return PqeResult(
        inner.value,
        "additive",
        eps=eps,
        worlds_enumerated=inner.worlds_enumerated,
        certificate={"n": n, "r_n": r_n, "kept_mass_lower": 1 - r_n},
    )

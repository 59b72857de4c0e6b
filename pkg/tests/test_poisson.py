import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from infpdb.core import EMPTY, BagInstance
from infpdb.errors import AlmostSureFact, DivergentRates, FactOutsideFamily
from infpdb.factspace import FactFamily
from infpdb.poisson import (
    REL_ERROR_BOUND,
    bag_world_prob,
    dedup,
    dedup_rates_from_marginals,
    rate_for_marginal,
    sample_counts,
    sample_poisson_many,
    split_almost_sure,
    validate_poisson,
)
from infpdb.ti import validate_ti

from conftest import R
from oracles import hoeffding, poisson_pmf

f, g = R(1), R(2)
LN2 = rate_for_marginal(Fraction(1, 2))


def rates(*pairs):
    return FactFamily.explicit(pairs, bounded=False)


def test_validate_examples():
    validate_poisson(FactFamily.geometric("R", Fraction(1, 2), Fraction(1, 2), bounded=False))
    with pytest.raises(DivergentRates):
        validate_poisson(FactFamily.geometric("R", 1, 1, bounded=False))
    empty = validate_poisson(rates())
    assert bag_world_prob(empty, EMPTY).value == 1


def test_bag_world_prob_examples():
    one = validate_poisson(rates((f, LN2)))
    assert bag_world_prob(one, EMPTY).value == pytest.approx(0.5, rel=1e-15)
    assert bag_world_prob(one, BagInstance.of(f)).value == pytest.approx(math.log(2) / 2, rel=1e-12)
    two = validate_poisson(rates((f, 1), (g, 1)))
    got = bag_world_prob(two, BagInstance.of(f, g, g))
    assert abs(got.value - math.exp(-2) / 2) <= 2 ** -40 * got.value
    assert got.rel_error <= 2 ** -40 and REL_ERROR_BOUND <= 2 ** -40
    with pytest.raises(FactOutsideFamily):
        bag_world_prob(one, BagInstance.of(g))


@pytest.mark.parametrize("lam", [Fraction(1, 10), Fraction(1), Fraction(5, 2), Fraction(5)])
def test_single_fact_pmf_sums_to_one(lam):
    pdb = validate_poisson(rates((f, lam)))
    total = sum(bag_world_prob(pdb, BagInstance({f: k}) if k else EMPTY).value for k in range(51))
    assert abs(total - 1) <= 1e-12
    for k in range(6):
        w = BagInstance({f: k}) if k else EMPTY
        assert bag_world_prob(pdb, w).value == pytest.approx(poisson_pmf(float(lam), k), rel=1e-13)


def test_binomial_limit():
    lam, n = 1.5, 10_000
    for k in range(8):
        assert abs(stats.binom.pmf(k, n, lam / n) - poisson_pmf(lam, k)) < 1e-3


def test_dedup_rates_examples():
    pdb = dedup_rates_from_marginals(validate_ti(FactFamily.explicit(
        [(f, Fraction(1, 2)), (g, Fraction(0)), (R(3), Fraction(3, 4))])))
    assert float(pdb.rate(f)) == pytest.approx(math.log(2), rel=1e-15)
    assert pdb.rate(g) == 0
    assert float(pdb.rate(R(3))) == pytest.approx(math.log(4), rel=1e-15)
    assert pdb.marginal(R(3)) == pytest.approx(0.75, rel=1e-15)
    with pytest.raises(AlmostSureFact):
        rate_for_marginal(1)


def test_dedup_examples():
    assert dedup(BagInstance.of(f, f, g)) == BagInstance.of(f, g)
    assert dedup(BagInstance.of(f, g)) == BagInstance.of(f, g)
    assert dedup(EMPTY) == EMPTY


def test_split_almost_sure():
    ti = validate_ti(FactFamily.explicit([(f, 1), (g, Fraction(1, 2))]))
    pois, point = split_almost_sure(ti)
    assert point.worlds == ((BagInstance.of(f), 1),)
    assert pois.rate(f) == 0 and pois.marginal(g) == pytest.approx(0.5)


def test_sampler_examples(rng):
    n = 100_000
    zero = sample_poisson_many(validate_poisson(rates((f, 0))), rng, 1000)
    assert all(w.mult(f) == 0 for w in zero)
    ln2 = sample_poisson_many(validate_poisson(rates((f, LN2))), rng, n)
    assert abs(sum(not w for w in ln2) / n - 0.5) <= 0.01
    _, counts = sample_counts(validate_poisson(rates((f, 1))), rng, n)
    assert abs(counts[:, 0].mean() - 1.0) <= 0.02


def test_dedup_correspondence_and_independence(rng):
    n = 100_000
    ps = [Fraction(1, 2), Fraction(3, 4), Fraction(1, 10)]
    ti = validate_ti(FactFamily.explicit([(R(i), p) for i, p in enumerate(ps)]))
    facts, counts = sample_counts(dedup_rates_from_marginals(ti), rng, n)
    present = counts > 0
    tol = hoeffding(n)
    for j, p in enumerate(ps):
        assert abs(present[:, j].mean() - float(p)) <= tol
    x, y = counts[:, 0].astype(float), counts[:, 1].astype(float)
    assert abs(np.cov(x, y)[0, 1]) <= 3 * np.sqrt(x.var() * y.var() / n)


def test_total_size_fits_poisson(rng):
    lam = [Fraction(1, 2), Fraction(3, 10), Fraction(1, 5)]
    _, counts = sample_counts(validate_poisson(rates(*[(R(i), l) for i, l in enumerate(lam)])), rng, 50_000)
    sizes = counts.sum(axis=1)
    ks = np.arange(5)
    observed = np.append([np.count_nonzero(sizes == k) for k in ks], np.count_nonzero(sizes >= 5))
    expected = np.append(stats.poisson.pmf(ks, 1.0), stats.poisson.sf(4, 1.0)) * len(sizes)
    assert stats.chisquare(observed, expected).pvalue >= 0.01

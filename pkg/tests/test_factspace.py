import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infpdb.core import Fact
from infpdb.errors import InvalidPdb, InvalidProbability, NonconvergentFamily
from infpdb.factspace import (
    INDEX,
    FactFamily,
    FactTemplate,
    GeometricTail,
    families_may_overlap,
    marginal_of,
    tail_mass,
    total_mass,
    truncation_index,
)

from conftest import R

GEO = FactFamily.geometric("R", Fraction(1, 2), Fraction(1, 2))


def test_marginal_of_examples():
    assert marginal_of(GEO, R(3)) == Fraction(1, 8)
    fam = FactFamily.explicit([(R(1), Fraction(1, 2))])
    assert marginal_of(fam, Fact("S", (1,))) == 0
    assert marginal_of(fam, R(1)) == Fraction(1, 2)
    assert marginal_of(GEO, R(0)) == 0
    assert marginal_of(GEO, R("3")) == 0


def test_total_mass_examples():
    assert total_mass(GEO).is_exact and total_mass(GEO).value == 1
    partial = sum(Fraction(1, 2**i) for i in range(1, 65))
    assert partial < total_mass(GEO).value <= partial + Fraction(1, 2**64)
    two = FactFamily.explicit([(R(1), Fraction(1, 2)), (R(2), Fraction(1, 4))])
    assert total_mass(two).value == Fraction(3, 4)
    assert total_mass(FactFamily()).value == 0


def test_tail_mass_examples():
    assert tail_mass(GEO, 4).value == Fraction(1, 16)
    assert sum(Fraction(1, 2**i) for i in range(5, 201)) <= Fraction(1, 16)
    assert tail_mass(GEO, 0) == total_mass(GEO)
    two = FactFamily.explicit([(R(1), Fraction(1, 2)), (R(2), Fraction(1, 4))])
    assert tail_mass(two, 2).value == 0


def test_truncation_index_examples():
    assert truncation_index(GEO, Fraction(1, 10)) == 4
    assert truncation_index(GEO, Fraction(1, 100)) == 7
    assert truncation_index(GEO, 1) == 0
    two = FactFamily.explicit([(R(1), Fraction(1, 2)), (R(2), Fraction(1, 4))])
    assert truncation_index(two, Fraction(1, 1000)) <= 2


def test_truncation_of_divergent_family_is_refused():
    const = FactFamily.geometric("R", Fraction(1, 2), 1)
    assert not total_mass(const).finite
    with pytest.raises(NonconvergentFamily):
        truncation_index(const, Fraction(1, 10))


def test_prefix_then_tail_indexing():
    fam = FactFamily.geometric("R", Fraction(1, 4), Fraction(1, 3), start=10,
                               prefix=[(Fact("S", ("a",)), Fraction(1, 2)), (R(2), Fraction(1, 5))])
    assert fam.fact_at(1) == Fact("S", ("a",))
    assert fam.fact_at(3) == R(10)
    assert fam.value_at(4) == Fraction(1, 12)
    assert fam.index_of(R(11)) == 4
    assert fam.index_of(R(9)) is None
    assert total_mass(fam).value == Fraction(1, 2) + Fraction(1, 5) + Fraction(3, 8)


def test_construction_errors():
    with pytest.raises(InvalidPdb):
        FactFamily.explicit([(R(1), Fraction(1, 2)), (R(1), Fraction(1, 3))])
    with pytest.raises(InvalidProbability):
        FactFamily.explicit([(R(1), Fraction(3, 2))])
    with pytest.raises(InvalidPdb):
        FactFamily.geometric("R", Fraction(1, 2), Fraction(1, 2), prefix=[(R(3), Fraction(1, 2))])
    with pytest.raises(ValueError):
        FactTemplate("R", (1,))
    with pytest.raises(ValueError):
        GeometricTail(FactTemplate("R", (INDEX,)), Fraction(1, 2), Fraction(3, 2))
    # rate families may exceed 1
    assert FactFamily.explicit([(R(1), 5)], bounded=False).total_mass().value == 5


def test_template_overlap_detection():
    a = FactFamily.geometric("R", Fraction(1, 2), Fraction(1, 2))
    b = FactFamily.geometric("R", Fraction(1, 2), Fraction(1, 2), start=5)
    c = FactFamily((), GeometricTail(FactTemplate("R", (INDEX, 0)), Fraction(1, 2), Fraction(1, 2)))
    assert families_may_overlap(a, b)
    assert not families_may_overlap(a, c)
    assert not families_may_overlap(a, FactFamily.explicit([(R(0), Fraction(1, 2))]))
    assert families_may_overlap(a, FactFamily.explicit([(R(7), Fraction(1, 2))]))


families = st.builds(
    lambda pre, first, ratio: FactFamily.geometric(
        "R", first, ratio, start=len(pre) + 1, prefix=[(Fact("P", (i,)), p) for i, p in enumerate(pre)]
    ),
    st.lists(st.fractions(0, 1, max_denominator=20), max_size=5),
    st.fractions(0, 1, max_denominator=20),
    st.fractions(Fraction(1, 20), Fraction(19, 20), max_denominator=20),
)


@settings(max_examples=80)
@given(families, st.integers(0, 40))
def test_tail_mass_is_sound_and_monotone(fam, n):
    total = total_mass(fam)
    head = fam.prefix_mass(n)
    r = tail_mass(fam, n)
    assert head + r.upper >= total.lower
    assert head + r.lower <= total.upper
    assert tail_mass(fam, n + 1).upper <= r.upper


@settings(max_examples=60)
@given(families, st.fractions(Fraction(1, 10**6), 1), st.fractions(Fraction(1, 10**6), 1))
def test_truncation_index_is_smallest_and_monotone(fam, e1, e2):
    lo, hi = sorted((e1, e2))
    n = truncation_index(fam, lo)
    assert tail_mass(fam, n).upper <= lo
    assert n == 0 or tail_mass(fam, n - 1).upper > lo
    assert truncation_index(fam, hi) <= n


def test_enumeration_is_injective():
    rnd = random.Random(3)
    for _ in range(3):
        fam = FactFamily((), GeometricTail(FactTemplate("T", (rnd.randint(0, 5), INDEX, "x")), Fraction(1, 2),
                                           Fraction(1, 2)))
        facts = [f for f, _ in fam.entries(10_000)]
        assert len(set(facts)) == 10_000

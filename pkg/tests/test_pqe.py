from fractions import Fraction

import mpmath
import numpy as np
import pytest

from infpdb import combinators as C
from infpdb.bid import validate_bid
from infpdb.core import Fact
from infpdb.errors import ModeMismatch, WorldBudgetExceeded
from infpdb.factspace import FactFamily
from infpdb.pqe import BUDGET_ENV, approx_pqe, exact_pqe, hoeffding_halfwidth, mc_pqe
from infpdb.query import parse_query
from infpdb.ti import validate_ti

from checks import approx_sweep, order_blocks
from conftest import R, random_ti_family
from oracles import formula_consts, geometric_any_oracle, naive_eval, plain, ti_law

HALF = Fraction(1, 2)
ANY = "E x. R(x)"


@pytest.fixture
def two_half():
    return validate_ti(FactFamily.explicit([(R(1), HALF), (R(2), HALF)]))


@pytest.fixture
def geometric():
    return validate_ti(FactFamily.geometric("R", HALF, HALF))


def test_exact_examples(two_half):
    res = exact_pqe(two_half, ANY)
    assert res.value == Fraction(3, 4) and res.worlds_enumerated == 4
    assert exact_pqe(two_half, "E x. R(x) & !R(x)").value == 0
    orders = validate_bid(order_blocks())
    assert exact_pqe(orders, "E x,y,z,w. Order(x, y, z, w)").value == 1


def test_exact_matches_world_oracle(rnd):
    for _ in range(25):
        fam = random_ti_family(rnd, rnd.randint(0, 5))
        pdb = validate_ti(fam)
        for text in [ANY, "A x. R(x)", "R(1) & !R(2)", "E x. R(x) & x = 3"]:
            q = parse_query(text)
            law = ti_law({plain(f): p for f, p in fam.prefix})
            expected = sum((p for w, p in law.items() if naive_eval(q.formula, w, formula_consts(q.formula))), Fraction(0))
            assert exact_pqe(pdb, q).value == expected


def test_exact_on_decomposition_matches_ti(rnd):
    for _ in range(15):
        fam = random_ti_family(rnd, rnd.randint(1, 5))
        pdb = validate_ti(fam)
        k = len(fam.prefix)
        parts = [set(range(1, k + 1, 2)), set(range(2, k + 1, 2))]
        sp = C.superpose(C.decompose_ti(pdb, [p for p in parts if p]))
        for text in [ANY, "A x. R(x)", "E x. !R(x)"]:
            assert exact_pqe(sp, text).value == exact_pqe(pdb, text).value


def test_exact_workers_agree(rnd):
    pdb = validate_ti(random_ti_family(rnd, 10))
    assert exact_pqe(pdb, ANY, workers=4).value == exact_pqe(pdb, ANY).value


def test_exact_budget(two_half, geometric, monkeypatch):
    with pytest.raises(WorldBudgetExceeded):
        exact_pqe(two_half, ANY, budget=3)
    with pytest.raises(WorldBudgetExceeded):
        exact_pqe(geometric, ANY)
    monkeypatch.setenv(BUDGET_ENV, "2")
    with pytest.raises(WorldBudgetExceeded):
        exact_pqe(two_half, ANY)
    with pytest.raises(WorldBudgetExceeded):
        approx_pqe(geometric, ANY, Fraction(1, 100))


def test_approx_examples(geometric):
    truth = float(geometric_any_oracle())
    assert truth == pytest.approx(0.711211905, abs=1e-9)
    res = approx_pqe(geometric, ANY, Fraction(1, 10))
    assert res.certificate["n"] == 4 and res.value == Fraction(709, 1024)
    assert res.certificate["r_n"] <= Fraction(1, 10)
    fine = approx_pqe(geometric, ANY, Fraction(1, 100))
    assert fine.certificate["n"] == 7
    for r in (res, fine):
        assert abs(float(r.value) - truth) <= r.eps and r.covers(truth)


def test_approx_on_finite_family_is_exact(two_half):
    res = approx_pqe(two_half, ANY, Fraction(1, 10))
    assert res.value == Fraction(3, 4) and res.certificate["r_n"] == 0


def test_approx_argument_checks(geometric):
    for eps in (0, HALF, -1, 2):
        with pytest.raises(ValueError):
            approx_pqe(geometric, ANY, eps)
    with pytest.raises(ModeMismatch):
        approx_pqe(validate_bid(order_blocks()), ANY, Fraction(1, 10))


def test_kept_mass_bound():
    # the conditioning event keeps at least 1 - r_n of the mass
    fam = FactFamily.geometric("R", HALF, HALF)
    for n in range(1, 21):
        with mpmath.workdps(30):
            kept = mpmath.nprod(lambda i: 1 - mpmath.mpf(2) ** -i, [n + 1, mpmath.inf])
            r_n = fam.tail_mass(n)
            assert r_n.is_exact and r_n.value == Fraction(1, 2**n)
            assert kept >= 1 - mpmath.mpf(r_n.value.numerator) / r_n.value.denominator


def test_approx_sweep_small():
    ok, detail = approx_sweep(instances=40, seed=11)
    assert ok, detail


def test_mc_examples(two_half, geometric):
    sure = validate_ti(FactFamily.explicit([(R(1), 1)]))
    assert mc_pqe(sure, ANY, 1000, rng=np.random.default_rng(1)).value == 1.0
    res = mc_pqe(two_half, ANY, 100_000, rng=np.random.default_rng(2))
    assert abs(res.value - 0.75) <= 0.01 and res.covers(0.75)
    assert res.eps == pytest.approx(hoeffding_halfwidth(100_000, 0.99) * 1.01)
    geo = mc_pqe(geometric, ANY, 100_000, rng=np.random.default_rng(3))
    assert abs(geo.value - 0.7112) <= 0.01


def test_mc_on_other_models():
    orders = validate_bid(order_blocks())
    q = parse_query('E x,y,w. Order(x, y, "Miami", w)')
    res = mc_pqe(orders, q, 50_000, rng=np.random.default_rng(4))
    assert res.covers(Fraction(6, 10))


def test_mc_is_independent_of_workers(geometric):
    a = mc_pqe(geometric, ANY, 20_000, rng=np.random.default_rng(5))
    b = mc_pqe(geometric, ANY, 20_000, rng=np.random.default_rng(5), workers=4)
    assert a.value == b.value and a.certificate == b.certificate


def test_mc_argument_checks(two_half):
    with pytest.raises(ValueError):
        mc_pqe(two_half, ANY, 0)
    with pytest.raises(ValueError):
        mc_pqe(two_half, ANY, 10, confidence=1)


def test_interval_is_clipped():
    sure = validate_ti(FactFamily.explicit([(Fact("R", (1,)), 1)]))
    lo, hi = mc_pqe(sure, ANY, 100, rng=np.random.default_rng(0)).interval
    assert hi == 1.0 and lo < 1.0

import itertools
import random
from fractions import Fraction

import numpy as np
import pytest

from infpdb.bid import (
    BlockTail,
    bid_as_superposition,
    iter_worlds,
    sample_bid,
    sample_bid_many,
    validate_bid,
    world_law,
    world_prob_bid,
)
from infpdb.core import EMPTY, BagInstance, Fact, explicit_superpose
from infpdb.errors import BlockOverflow, DivergentBlocks, OverlappingBlocks
from infpdb.factspace import INDEX, FactTemplate

from conftest import R
from oracles import bid_law, hoeffding, plain


def order(oid, name, ship, price):
    return Fact("Order", (oid, name, ship, price))


JOE, BOB = order(1, "Joe", "Seattle", 25), order(1, "Bob", "Boston", 25)
EMMA = order(2, "Emma", "Denver", 40)
DAVE, SOPHIA, ISABELLA = order(3, "Dave", "Austin", 15), order(3, "Sophia", "Miami", 15), order(3, "Isabella", "Chicago", 15)
ORDER_BLOCKS = [
    [(JOE, Fraction(8, 10)), (BOB, Fraction(2, 10))],
    [(EMMA, Fraction(1))],
    [(DAVE, Fraction(2, 10)), (SOPHIA, Fraction(6, 10)), (ISABELLA, Fraction(1, 10))],
]


@pytest.fixture
def orders():
    return validate_bid(ORDER_BLOCKS)


def test_validate_examples(orders):
    assert len(orders.blocks) == 3
    with pytest.raises(BlockOverflow):
        validate_bid([[(R(1), Fraction(7, 10)), (R(2), Fraction(7, 10))]])
    with pytest.raises(OverlappingBlocks):
        validate_bid([[(R(1), Fraction(1, 2))], [(R(1), Fraction(1, 4))]])


def test_infinite_block_family():
    tmpl = [FactTemplate("B", (INDEX, "a")), FactTemplate("B", (INDEX, "b"))]
    pdb = validate_bid([], BlockTail(tmpl, [Fraction(1, 2), Fraction(1, 2)], Fraction(1, 2), Fraction(1, 2)))
    assert pdb.marginal(Fact("B", (3, "a"))) == Fraction(1, 16)
    with pytest.raises(DivergentBlocks):
        validate_bid([], BlockTail(tmpl, [Fraction(1, 2), Fraction(1, 2)], Fraction(1, 2), 1))


def test_world_prob_examples(orders):
    assert world_prob_bid(orders, BagInstance.of(JOE, EMMA, SOPHIA)) == Fraction(48, 100)
    assert world_prob_bid(orders, BagInstance.of(JOE, BOB, EMMA)) == 0
    assert world_prob_bid(orders, EMPTY) == 0


def test_order_law_against_oracle(orders):
    pairs = list(iter_worlds(orders, include_null=True))
    assert len(pairs) == 24
    assert sum(p for _, p in pairs) == 1
    oracle = bid_law([[(plain(f), p) for f, p in b] for b in ORDER_BLOCKS])
    got = {frozenset(plain(f) for f in w.support()): p for w, p in world_law(orders).worlds}
    assert got == oracle


def random_bid(rnd: random.Random):
    blocks, n = [], 0
    for _ in range(rnd.randint(0, 4)):
        size = rnd.randint(1, 3)
        weights = [rnd.randint(0, 4) for _ in range(size + 1)]
        if not sum(weights):
            weights[-1] = 1
        total = sum(weights)
        block = []
        for w in weights[:-1]:
            n += 1
            block.append((R(n), Fraction(w, total)))
        blocks.append(block)
    return blocks


def test_random_bid_laws(rnd):
    for _ in range(40):
        blocks = random_bid(rnd)
        pdb = validate_bid(blocks)
        law = world_law(pdb)
        assert sum(p for _, p in law.worlds) == 1
        # cross-block independence and within-block exclusion
        for (i, bi), (j, bj) in itertools.combinations(enumerate(blocks), 2):
            for (x, px), (y, py) in itertools.product(bi, bj):
                assert law.event_prob(lambda w: x in w and y in w) == px * py
        for block in blocks:
            for (x, _), (y, _) in itertools.combinations(block, 2):
                assert world_prob_bid(pdb, BagInstance.of(x, y)) == 0
        for w, p in law.worlds:
            assert world_prob_bid(pdb, w) == p


def test_bid_as_superposition(orders, rnd):
    comps = bid_as_superposition(orders)
    assert len(comps) == 3
    law = comps[0]
    for c in comps[1:]:
        law = explicit_superpose(law, c)
    assert law == world_law(orders)
    one = validate_bid([[(R(1), Fraction(1, 3))]])
    assert bid_as_superposition(one) == [world_law(one)]
    zero = bid_as_superposition(validate_bid([]))
    assert len(zero) == 1 and zero[0].worlds == ((EMPTY, 1),)
    for _ in range(20):
        pdb = validate_bid(random_bid(rnd))
        comps = bid_as_superposition(pdb)
        law = comps[0]
        for c in comps[1:]:
            law = explicit_superpose(law, c)
        assert law == world_law(pdb)


def test_sampler(orders, rng):
    sure = validate_bid([[(R(1), Fraction(1))]])
    assert all(sample_bid(sure, rng) == BagInstance.of(R(1)) for _ in range(20))
    half = validate_bid([[(R(1), Fraction(1, 2))]])
    assert all(w.mult(R(1)) <= 1 for w in sample_bid_many(half, rng, 1000))
    n = 100_000
    worlds = sample_bid_many(orders, rng, n)
    assert abs(sum(SOPHIA in w for w in worlds) / n - 0.6) <= max(0.01, hoeffding(n))
    assert all(EMMA in w for w in worlds[:1000])
    assert not any(JOE in w and BOB in w for w in worlds)


def test_sampler_is_deterministic(orders):
    a = sample_bid_many(orders, np.random.default_rng(3), 100)
    assert a == sample_bid_many(orders, np.random.default_rng(3), 100)

import random
from fractions import Fraction

import numpy as np
import pytest

from infpdb.core import Fact
from infpdb.factspace import FactFamily


def R(*args):
    return Fact("R", args)


def random_rational(rnd: random.Random, max_den: int = 12, edges: bool = True) -> Fraction:
    """Random probability; ``edges=False`` keeps it strictly below 1."""
    if edges and rnd.random() < 0.08:
        return Fraction(rnd.choice((0, 1)))
    den = rnd.randint(1 if edges else 2, max_den)
    return Fraction(rnd.randint(0, den if edges else den - 1), den)


def random_ti_family(rnd: random.Random, k: int, max_den: int = 12, edges: bool = True) -> FactFamily:
    return FactFamily.explicit([(R(i), random_rational(rnd, max_den, edges)) for i in range(1, k + 1)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


@pytest.fixture
def rnd():
    return random.Random(7)

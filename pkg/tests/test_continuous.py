import math
from fractions import Fraction

import numpy as np
import pytest

from infpdb.continuous import (
    PiecewiseIntensity,
    count_statistics,
    has_duplicate_points,
    measure_of,
    poisson_chisquare,
    sample_flat,
    sample_point_sets,
    sample_poisson_process,
    window_counts,
)
from infpdb.core import EMPTY

HALF = Fraction(1, 2)
UNIT = PiecewiseIntensity([(0, 1, 1)])


def test_measure_examples():
    assert measure_of(UNIT, [(0, HALF)]) == HALF
    assert measure_of(UNIT, []) == 0
    two = PiecewiseIntensity([(0, 1, 2), (2, 3, 1)])
    assert measure_of(two, [(0, 3)]) == 3
    assert two.total == 3
    # overlapping targets are merged before integrating
    assert measure_of(two, [(0, HALF), (Fraction(1, 4), 1)]) == 2


def test_measure_is_additive(rnd):
    two = PiecewiseIntensity([(0, 1, 2), (2, 3, 1)])
    for _ in range(50):
        cuts = sorted(Fraction(rnd.randint(0, 40), 10) for _ in range(4))
        a, b = [(cuts[0], cuts[1])], [(cuts[2], cuts[3])]
        assert measure_of(two, a + b) == measure_of(two, a) + measure_of(two, b)


def test_invalid_pieces():
    with pytest.raises(ValueError):
        PiecewiseIntensity([(0, 1, 1), (HALF, 2, 1)])
    with pytest.raises(ValueError):
        PiecewiseIntensity([(1, 1, 1)])
    with pytest.raises(ValueError):
        PiecewiseIntensity([(0, 1, -1)])


def test_empty_count_matches_poisson(rng):
    n = 100_000
    sizes, _ = sample_flat(UNIT, rng, n)
    assert abs(np.mean(sizes == 0) - math.exp(-1)) <= 0.01


def test_zero_intensity_is_empty(rng):
    zero = PiecewiseIntensity([(0, 1, 0)])
    assert all(sample_poisson_process(zero, rng) == EMPTY for _ in range(100))
    assert sample_poisson_process(PiecewiseIntensity([]), rng) == EMPTY


def test_points_follow_density(rng):
    skew = PiecewiseIntensity([(0, 1, 3), (1, 2, 1)])
    sets = sample_point_sets(skew, rng, 20_000)
    pts = np.concatenate(sets)
    assert np.all((pts >= 0) & (pts < 2))
    assert abs(np.mean(pts < 1) - 0.75) <= 0.01
    world = sample_poisson_process(skew, rng)
    assert all(f.relation == "X" and isinstance(f.args[0], float) for f in world)


def test_window_mean(rng):
    sets = sample_point_sets(UNIT, rng, 100_000)
    counts = window_counts(sets, [(0, HALF)])
    assert abs(counts[:, 0].mean() - 0.5) <= 0.02


def test_count_statistics_examples(rng):
    sets = sample_point_sets(UNIT, rng, 100_000)
    rep = count_statistics(sets, [(0, HALF), (HALF, 1)], UNIT, alpha=0.01)
    assert rep.fits() and rep.independent()
    assert [w.expected_mean for w in rep.windows] == [0.5, 0.5]
    full = count_statistics(sets, [(0, 1)], UNIT)
    assert full.fits() and full.windows[0].expected_mean == 1.0
    assert full.covariance == []
    empty = count_statistics([], [(0, 1)], UNIT)
    assert empty.samples == 0 and empty.windows == [] and empty.fits()
    d = rep.to_dict()
    assert d["samples"] == 100_000 and len(d["windows"]) == 2 and d["covariance"][0]["windows"] == [0, 1]


def test_count_statistics_rejects_overlap():
    with pytest.raises(ValueError):
        count_statistics([np.array([0.1])], [(0, HALF), (Fraction(1, 4), 1)])


def test_chisquare_detects_a_wrong_rate(rng):
    counts = rng.poisson(1.3, size=20_000)
    assert poisson_chisquare(counts, 1.3)["p_value"] > 0.001
    assert poisson_chisquare(counts, 1.0)["p_value"] < 1e-6


def test_superposition_closure(rng):
    a = PiecewiseIntensity([(0, 1, 1)])
    b = PiecewiseIntensity([(HALF, 2, 2)])
    n = 50_000
    merged = [np.concatenate(p) for p in zip(sample_point_sets(a, rng, n), sample_point_sets(b, rng, n))]
    both = a + b
    assert both.total == 4
    windows = [(0, HALF), (HALF, 1), (1, 2)]
    assert count_statistics(merged, windows, both).fits()
    assert count_statistics(sample_point_sets(both, rng, n), windows, both).fits()


def test_restriction_closure(rng):
    skew = PiecewiseIntensity([(0, 1, 2), (2, 3, 1)])
    window = (HALF, Fraction(5, 2))
    sets = sample_point_sets(skew, rng, 50_000)
    restricted = [s[(s >= 0.5) & (s < 2.5)] for s in sets]
    rep = count_statistics(restricted, [window], skew)
    assert rep.windows[0].expected_mean == float(measure_of(skew, [window])) == 1.5
    assert rep.fits()


def test_no_duplicate_points(rng):
    sizes, pts = sample_flat(PiecewiseIntensity([(0, 1, 3)]), rng, 1_000_000)
    assert not has_duplicate_points(sizes, pts)
    assert has_duplicate_points(np.array([2]), np.array([0.25, 0.25]))
    assert not has_duplicate_points(np.array([1, 1]), np.array([0.25, 0.25]))

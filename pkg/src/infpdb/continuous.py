"""Poisson PDBs over a unary relation with real-valued arguments.

The parameter measure has a piecewise-constant density on finitely many
half-open intervals. A world is drawn by taking ``N ~ Poisson(total mass)``
points i.i.d. from the normalized density (via its inverse CDF).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .core import BagInstance, Fact

Number = Union[int, float, Fraction]


@dataclass(frozen=True)
class Piece:
    lo: Number
    hi: Number
    density: Number

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi})")
        if self.density < 0:
            raise ValueError("density must be non-negative")


@dataclass(frozen=True)
class PiecewiseIntensity:
    pieces: tuple
    relation: str = "X"

    def __init__(self, pieces: Iterable, relation: str = "X"):
        ps = tuple(sorted((p if isinstance(p, Piece) else Piece(*p) for p in pieces), key=lambda p: p.lo))
        for a, b in zip(ps, ps[1:]):
            if b.lo < a.hi:
                raise ValueError(f"intervals [{a.lo}, {a.hi}) and [{b.lo}, {b.hi}) overlap")
        object.__setattr__(self, "pieces", ps)
        object.__setattr__(self, "relation", relation)

    @property
    def total(self) -> Number:
        return sum((p.density * (p.hi - p.lo) for p in self.pieces), 0)

    def __add__(self, other: "PiecewiseIntensity") -> "PiecewiseIntensity":
        """Intensity of the superposition: densities add pointwise."""
        cuts = sorted({x for p in self.pieces + other.pieces for x in (p.lo, p.hi)})
        merged = []
        for lo, hi in zip(cuts, cuts[1:]):
            d = _density_at(self, lo) + _density_at(other, lo)
            if d:
                merged.append(Piece(lo, hi, d))
        return PiecewiseIntensity(merged, self.relation)


def _density_at(intensity: PiecewiseIntensity, x) -> Number:
    for p in intensity.pieces:
        if p.lo <= x < p.hi:
            return p.density
    return 0


def _normalize(target: Iterable[tuple[Number, Number]]) -> list[tuple[Number, Number]]:
    spans = sorted((lo, hi) for lo, hi in target if lo < hi)
    merged: list[list] = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def measure_of(intensity: PiecewiseIntensity, target: Iterable[tuple[Number, Number]]) -> Number:
    """Mass of a finite union of half-open intervals under the intensity."""
    total = 0
    for lo, hi in _normalize(target):
        for p in intensity.pieces:
            overlap = min(hi, p.hi) - max(lo, p.lo)
            if overlap > 0:
                total += p.density * overlap
    return total


def sample_points(intensity: PiecewiseIntensity, rng: np.random.Generator) -> np.ndarray:
    """One realization as a float array (unsorted)."""
    return sample_point_sets(intensity, rng, 1)[0]


def sample_point_sets(intensity: PiecewiseIntensity, rng: np.random.Generator, count: int) -> list[np.ndarray]:
    """``count`` independent realizations."""
    sizes, pts = sample_flat(intensity, rng, count)
    return np.split(pts, np.cumsum(sizes)[:-1]) if count else []


def sample_flat(intensity: PiecewiseIntensity, rng: np.random.Generator, count: int) -> tuple[np.ndarray, np.ndarray]:
    """``count`` realizations as (per-realization sizes, concatenated points)."""
    total = float(intensity.total)
    if total == 0:
        return np.zeros(count, dtype=np.int64), np.empty(0)
    sizes = rng.poisson(total, size=count)
    return sizes, inverse_cdf(intensity, rng.random(int(sizes.sum())))


def inverse_cdf(intensity: PiecewiseIntensity, u: np.ndarray) -> np.ndarray:
    """Map uniforms in [0, 1) to points distributed like the normalized density."""
    pieces = [p for p in intensity.pieces if p.density > 0]
    masses = np.array([float(p.density * (p.hi - p.lo)) for p in pieces])
    cum = np.concatenate([[0.0], np.cumsum(masses)])
    target = u * cum[-1]
    k = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, len(pieces) - 1)
    lo = np.array([float(p.lo) for p in pieces])
    dens = np.array([float(p.density) for p in pieces])
    hi = np.array([float(p.hi) for p in pieces])
    x = lo[k] + (target - cum[k]) / dens[k]
    # Rounding can land exactly on an open right end.
    return np.minimum(x, np.nextafter(hi[k], -np.inf))


def sample_poisson_process(intensity: PiecewiseIntensity, rng: np.random.Generator) -> BagInstance:
    pts = sample_points(intensity, rng)
    return points_to_bag(intensity.relation, pts)


def points_to_bag(relation: str, pts: np.ndarray) -> BagInstance:
    counts: dict[Fact, int] = {}
    for x in pts.tolist():
        f = Fact(relation, (float(x),))
        counts[f] = counts.get(f, 0) + 1
    return BagInstance(counts)


def bag_points(world: BagInstance) -> np.ndarray:
    return np.array([f.args[0] for f in world], dtype=float)


def window_counts(point_sets: Sequence[np.ndarray], windows: Sequence[tuple[Number, Number]]) -> np.ndarray:
    """Matrix ``[sample, window]`` of point counts."""
    sizes = np.array([len(p) for p in point_sets], dtype=np.int64)
    pts = np.concatenate(point_sets) if len(point_sets) else np.empty(0)
    return window_counts_flat(sizes, pts, windows)


def window_counts_flat(sizes: np.ndarray, pts: np.ndarray, windows: Sequence[tuple[Number, Number]]) -> np.ndarray:
    owner = np.repeat(np.arange(len(sizes)), sizes)
    out = np.zeros((len(sizes), len(windows)), dtype=np.int64)
    for w, (lo, hi) in enumerate(windows):
        inside = (pts >= float(lo)) & (pts < float(hi))
        out[:, w] = np.bincount(owner[inside], minlength=len(sizes))
    return out


def poisson_chisquare(counts: np.ndarray, lam: float, min_expected: float = 5.0) -> dict:
    """Chi-square goodness of fit of integer counts to Poisson(lam).

    Cells ``0, 1, ..., K-1`` plus a final ``>= K`` cell; ``K`` is the largest
    value keeping every expected count at least ``min_expected``.
    """
    n = len(counts)
    if lam == 0:
        ok = bool(np.all(counts == 0))
        return {"chi2": 0.0, "dof": 0, "p_value": 1.0 if ok else 0.0, "cells": 1}
    k = 1
    while n * stats.poisson.pmf(k, lam) >= min_expected and n * stats.poisson.sf(k, lam) >= min_expected:
        k += 1
    # cells 0..k-1 and a final ">= k" cell
    expected = np.append(stats.poisson.pmf(np.arange(k), lam), stats.poisson.sf(k - 1, lam)) * n
    observed = np.append([np.count_nonzero(counts == i) for i in range(k)], np.count_nonzero(counts >= k))
    chi2, p = stats.chisquare(observed, expected)
    return {"chi2": float(chi2), "dof": k, "p_value": float(p), "cells": k + 1}


@dataclass
class WindowStats:
    window: tuple
    expected_mean: float
    mean: float
    pmf: dict
    chi2: float
    dof: int
    p_value: float


@dataclass
class CountReport:
    samples: int
    windows: list
    covariance: list           # (i, j, cov, z-score)
    alpha: float

    def fits(self) -> bool:
        return all(w.p_value >= self.alpha for w in self.windows)

    def independent(self, sigmas: float = 3.0) -> bool:
        return all(abs(z) <= sigmas for _, _, _, z in self.covariance)

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "alpha": self.alpha,
            "windows": [
                {
                    "window": [float(self.windows[i].window[0]), float(self.windows[i].window[1])],
                    "expected_mean": w.expected_mean,
                    "mean": w.mean,
                    "pmf": {str(k): v for k, v in w.pmf.items()},
                    "chi2": w.chi2,
                    "dof": w.dof,
                    "p_value": w.p_value,
                    "fits": w.p_value >= self.alpha,
                }
                for i, w in enumerate(self.windows)
            ],
            "covariance": [{"windows": [i, j], "cov": c, "z": z} for i, j, c, z in self.covariance],
        }


def count_statistics(samples: Sequence, windows: Sequence[tuple[Number, Number]],
                     intensity: Optional[PiecewiseIntensity] = None, alpha: float = 0.01) -> CountReport:
    """Per-window count pmf, Poisson fit and cross-window covariance.

    ``samples`` are bag instances or raw point arrays. The Poisson reference
    for each window is its mass under ``intensity`` (or, without one, the
    empirical mean).
    """
    ws = [(lo, hi) for lo, hi in windows]
    for (a, b), (c, d) in zip(sorted(ws), sorted(ws)[1:]):
        if c < b:
            raise ValueError("windows must be pairwise disjoint")
    if not samples:
        return CountReport(0, [], [], alpha)
    sets = [s if isinstance(s, np.ndarray) else bag_points(s) for s in samples]
    counts = window_counts(sets, ws)
    n = len(sets)
    out = []
    for w, win in enumerate(ws):
        col = counts[:, w]
        lam = float(measure_of(intensity, [win])) if intensity is not None else float(col.mean())
        fit = poisson_chisquare(col, lam)
        values, freq = np.unique(col, return_counts=True)
        out.append(WindowStats(win, lam, float(col.mean()), {int(v): int(c) / n for v, c in zip(values, freq)},
                               fit["chi2"], fit["dof"], fit["p_value"]))
    cov = []
    for i in range(len(ws)):
        for j in range(i + 1, len(ws)):
            x, y = counts[:, i].astype(float), counts[:, j].astype(float)
            c = float(np.cov(x, y)[0, 1]) if n > 1 else 0.0
            se = float(np.sqrt(x.var() * y.var() / n)) if n > 1 else 0.0
            cov.append((i, j, c, c / se if se > 0 else 0.0))
    return CountReport(n, out, cov, alpha)


def has_duplicate_points(sizes: np.ndarray, pts: np.ndarray) -> bool:
    """Whether any single realization repeats a point (exact bit equality)."""
    owner = np.repeat(np.arange(len(sizes)), sizes)
    order = np.lexsort((pts, owner))
    o, x = owner[order], pts[order]
    return bool(np.any((o[1:] == o[:-1]) & (x[1:] == x[:-1])))

"""Piecewise-linear below-approximants built from block infima.

Level n >= 3 splits the interval into 2**n equal blocks; the approximant
sits at the block infimum m_k on each block's plateau region and ramps
linearly between adjacent levels inside the narrow width-eps strips next
to the block boundaries (ramping up in the right-hand strip of the
boundary, down in the left-hand one, so the graph never leaves the block
whose infimum bounds it).  Levels 1 and 2 are the zero function.  The
construction requires f >= 0 and produces a continuous function with
0 <= f_n <= f whenever the block infima are exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from . import darboux
from .darboux import DEFAULT_CONFIG, Integrand, SamplingConfig, as_evaluator
from .partition import Interval, block_grid

__all__ = [
    "PiecewiseLinear",
    "NegativityError",
    "build_approximant",
    "eval_pl",
    "integrate_pl",
    "l1_distance",
    "write_csv",
]


class NegativityError(ValueError):
    pass


@dataclass(frozen=True, eq=False, slots=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function given by knots and values >= 0."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        kn = np.asarray(self.knots, dtype=float).copy()
        va = np.asarray(self.values, dtype=float).copy()
        if kn.ndim != 1 or kn.size < 2 or va.shape != kn.shape:
            raise ValueError("need matching knot/value sequences of length >= 2")
        if not np.all(np.diff(kn) > 0):
            raise ValueError("knots must be strictly increasing")
        if not np.all(va >= 0):
            raise ValueError("values must be nonnegative")
        kn.setflags(write=False)
        va.setflags(write=False)
        object.__setattr__(self, "knots", kn)
        object.__setattr__(self, "values", va)

    @property
    def interval(self) -> Interval:
        return Interval(float(self.knots[0]), float(self.knots[-1]))

    def __call__(self, x):
        return eval_pl(self, x)


def build_approximant(
    f: Integrand,
    iv: Interval,
    n: int,
    cfg: SamplingConfig = DEFAULT_CONFIG,
    hints: Sequence[float] | None = None,
) -> PiecewiseLinear:
    """Level-``n`` below-approximant of a nonnegative ``f`` over ``iv``.

    Block infima are sampled per ``cfg`` (exact when ``hints`` list the
    turning points of f).  A sampled negative value raises
    NegativityError.  Levels 1 and 2 return the zero function.
    """
    if n < 1:
        raise ValueError(f"level must be >= 1, got {n}")
    if iv.is_degenerate:
        raise ValueError("cannot approximate over a degenerate interval")
    if n <= 2:
        return PiecewiseLinear(np.array([iv.a, iv.b]), np.zeros(2))

    grid = block_grid(iv, n)
    blocks = grid.block_count
    m = np.empty(blocks)
    for k in range(1, blocks + 1):
        m[k - 1] = darboux.infimum_on(f, grid.block(k), cfg, hints)
    if (m < 0).any():
        k_bad = int(np.argmin(m)) + 1
        raise NegativityError(
            f"f is negative on block {k_bad} (sampled infimum {m[k_bad - 1]:.3g})"
        )

    xs: list[float] = []
    ys: list[float] = []

    def emit(x: float, y: float) -> None:
        if xs and x == xs[-1]:
            return
        xs.append(x)
        ys.append(y)

    # first plateau covers the first three sub-intervals of block 1
    p = grid.sub_boundaries(1)
    emit(p[0], m[0])
    emit(p[3], m[0])
    for k in range(1, blocks):
        left = grid.sub_boundaries(k)
        right = grid.sub_boundaries(k + 1)
        boundary = left[4]  # == right[0]
        mk, mk1 = m[k - 1], m[k]
        if mk <= mk1:
            # stay at m_k through the left strip, ramp up in the right one
            emit(boundary, mk)
            emit(right[1], mk1)
        else:
            # ramp down in the left strip, stay at m_{k+1} through the right
            emit(boundary, mk1)
            emit(right[1], mk1)
        plateau_end = right[4] if k + 1 == blocks else right[3]
        emit(plateau_end, mk1)
    return PiecewiseLinear(np.array(xs), np.array(ys))


def eval_pl(g: PiecewiseLinear, x):
    """Linear interpolation, exact at knots; outside the range is an error.

    Interpolated values are clamped into the bracketing knot values, so
    rounding can never push the result past a segment endpoint.
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    kn, va = g.knots, g.values
    if (arr < kn[0]).any() or (arr > kn[-1]).any():
        raise ValueError(f"point outside knot range [{kn[0]}, {kn[-1]}]")
    idx = np.clip(np.searchsorted(kn, arr, side="right") - 1, 0, kn.size - 2)
    y = np.interp(arr, kn, va)
    lo = np.minimum(va[idx], va[idx + 1])
    hi = np.maximum(va[idx], va[idx + 1])
    y = np.clip(y, lo, hi)
    return float(y[0]) if scalar else y


def integrate_pl(g: PiecewiseLinear, c: float, d: float) -> float:
    """Exact integral of ``g`` over [c, d] (trapezoid rule is exact here)."""
    iv = g.interval
    if not (iv.a <= c <= d <= iv.b):
        raise ValueError(f"[{c}, {d}] not inside knot range [{iv.a}, {iv.b}]")
    if c == d:
        return 0.0
    inner = g.knots[(g.knots > c) & (g.knots < d)]
    xs = np.concatenate([[c], inner, [d]])
    ys = eval_pl(g, xs)
    areas = 0.5 * (ys[:-1] + ys[1:]) * np.diff(xs)
    return math.fsum(areas)


def l1_distance(
    f: Integrand,
    g: PiecewiseLinear,
    iv: Interval,
    tol: float,
    cfg: SamplingConfig = DEFAULT_CONFIG,
) -> float:
    """Integral of |f - g| over ``iv`` to tolerance ``tol`` (nonnegative)."""
    ev = as_evaluator(f)

    def gap(xs: np.ndarray) -> np.ndarray:
        return np.abs(ev(xs) - eval_pl(g, xs))

    est = darboux.integrate(gap, iv, tol, cfg)
    return max(0.0, est.midpoint)


def write_csv(g: PiecewiseLinear, dest: str | IO[str]) -> None:
    """Two-column CSV (knot, value); '.' decimal separator, no locale."""
    own = isinstance(dest, str)
    fh = open(dest, "w", newline="") if own else dest
    try:
        writer = csv.writer(fh)
        writer.writerow(["knot", "value"])
        for x, y in zip(g.knots, g.values):
            writer.writerow([repr(float(x)), repr(float(y))])
    finally:
        if own:
            fh.close()

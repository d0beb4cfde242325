"""Sampled lower/upper Darboux sums and a bracketing integral estimator.

Per-cell extrema come from a finite sample grid, so the sums here are
"sampled Darboux" sums: the lower sum may overestimate a true infimum
between samples (and the upper sum underestimate a supremum).  For
functions that are piecewise monotone at the sampling scale the bracket
is exact; callers needing guarantees pass ``hints`` listing the interior
turning points, which makes every cell extremum exact.

``integrate`` doubles a uniform cell count until the bracket closes to
the requested tolerance; the midpoint of the final bracket is the point
estimate.  For smooth integrands the midpoint converges one order
faster than the bracket width (it is the trapezoid value when cell
extrema sit at cell edges), so moderate tolerances already give tight
values.

Isolated undefined sample points (both neighbours defined) are skipped
under the default policy; this is how endpoint singularities like a
derivative that only fails to exist at the boundary are tolerated.
Reductions run in fixed ascending cell order with compensated chunk
summation, so results do not depend on internal scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .expr import Expr, evaluate_array
from .partition import Interval, Partition, uniform_partition

__all__ = [
    "SamplingConfig",
    "DarbouxEstimate",
    "NonConvergenceError",
    "UndefinedSamplesError",
    "SKIP_ISOLATED",
    "FAIL_ON_UNDEFINED",
    "DEFAULT_CONFIG",
    "START_CELLS",
    "CELL_CAP",
    "compensated_sum",
    "as_evaluator",
    "infimum_on",
    "supremum_on",
    "lower_sum",
    "upper_sum",
    "integrate",
    "integrate_signed",
]

SKIP_ISOLATED = "skip-isolated"
FAIL_ON_UNDEFINED = "fail"

START_CELLS = 2**10
CELL_CAP = 2**24

_CHUNK_POINTS = 2**21  # bound per-chunk working memory to ~16 MB of samples

Evaluator = Callable[[np.ndarray], np.ndarray]
Integrand = Union[Expr, Evaluator]


class NonConvergenceError(RuntimeError):
    """Bracket failed to close; ``estimate`` holds the last bracket."""

    def __init__(self, message: str, estimate: "DarbouxEstimate"):
        super().__init__(message)
        self.estimate = estimate


class UndefinedSamplesError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class SamplingConfig:
    """How cell extrema are sampled.

    samples_per_cell=2 with endpoints included costs one evaluation per
    cell edge and is exact for cell-monotone integrands; the default 64
    guards oscillatory ones.
    """

    samples_per_cell: int = 64
    include_endpoints: bool = True
    undefined_policy: str = SKIP_ISOLATED

    def __post_init__(self):
        if self.samples_per_cell < 2:
            raise ValueError("samples_per_cell must be >= 2")
        if self.undefined_policy not in (SKIP_ISOLATED, FAIL_ON_UNDEFINED):
            raise ValueError(f"unknown undefined_policy {self.undefined_policy!r}")


DEFAULT_CONFIG = SamplingConfig()


@dataclass(frozen=True, slots=True)
class DarbouxEstimate:
    """One quadrature pass: sampled lower/upper sums over ``cells`` cells.

    ``norm`` is the partition norm (0 only for the degenerate-interval
    estimate).  The point estimate is ``midpoint``.
    """

    lower: float
    upper: float
    norm: float
    cells: int

    def __post_init__(self):
        if self.lower > self.upper:  # NaN-safe: comparison is False for NaN
            raise ValueError(f"bracket out of order: [{self.lower}, {self.upper}]")
        if self.norm < 0 or self.cells < 0:
            raise ValueError("norm and cells must be nonnegative")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def __neg__(self) -> "DarbouxEstimate":
        return DarbouxEstimate(-self.upper, -self.lower, self.norm, self.cells)


def as_evaluator(f: Integrand) -> Evaluator:
    """Adapt an expression or vectorized callable to ndarray -> ndarray."""
    if isinstance(f, Expr):
        return lambda xs: evaluate_array(f, xs)
    if callable(f):
        return lambda xs: np.asarray(f(xs), dtype=float)
    raise TypeError(f"not an integrand: {f!r}")


def compensated_sum(values: np.ndarray) -> float:
    """Deterministic compensated reduction in fixed (ascending) order."""
    values = np.asarray(values, dtype=float)
    if values.size <= 4096:
        return math.fsum(values)
    starts = np.arange(0, values.size, 4096)
    return math.fsum(np.add.reduceat(values, starts))


def _check_adjacent_undefined(mask: np.ndarray, policy: str, context: str) -> None:
    if not mask.any():
        return
    if policy == FAIL_ON_UNDEFINED:
        raise UndefinedSamplesError(f"undefined sample value in {context}")
    if mask.all() or (mask[:-1] & mask[1:]).any():
        raise UndefinedSamplesError(
            f"adjacent undefined samples in {context}; only isolated"
            " undefined points can be skipped"
        )


def _cell_samples(cell: Interval, cfg: SamplingConfig) -> np.ndarray:
    m = cfg.samples_per_cell
    if cfg.include_endpoints:
        return np.linspace(cell.a, cell.b, m)
    step = cell.width / (m + 1)
    return cell.a + step * np.arange(1, m + 1)


def _extremum_on(
    f: Integrand,
    cell: Interval,
    cfg: SamplingConfig,
    hints: Sequence[float] | None,
    want_max: bool,
) -> float:
    if cell.is_degenerate:
        raise ValueError("cell must be non-degenerate")
    ev = as_evaluator(f)
    xs = _cell_samples(cell, cfg)
    if hints:
        inside = [h for h in hints if cell.a < h < cell.b]
        if inside:
            xs = np.concatenate([xs, np.asarray(inside, dtype=float)])
            xs.sort()
    ys = ev(xs)
    mask = np.isnan(ys)
    _check_adjacent_undefined(mask, cfg.undefined_policy, f"cell [{cell.a}, {cell.b}]")
    good = ys[~mask]
    return float(good.max() if want_max else good.min())


def infimum_on(
    f: Integrand,
    cell: Interval,
    cfg: SamplingConfig = DEFAULT_CONFIG,
    hints: Sequence[float] | None = None,
) -> float:
    """Minimum of ``f`` over the cell's sample grid (approximate infimum).

    With ``hints`` (interior turning points of f) the value is the true
    infimum for functions monotone between hints.
    """
    return _extremum_on(f, cell, cfg, hints, want_max=False)


def supremum_on(
    f: Integrand,
    cell: Interval,
    cfg: SamplingConfig = DEFAULT_CONFIG,
    hints: Sequence[float] | None = None,
) -> float:
    """Maximum of ``f`` over the cell's sample grid (approximate supremum)."""
    return _extremum_on(f, cell, cfg, hints, want_max=True)


def _scatter_hints(
    extrema: np.ndarray,
    edges: np.ndarray,
    hint_xs: np.ndarray,
    hint_ys: np.ndarray,
    want_max: bool,
) -> None:
    if hint_xs.size == 0:
        return
    idx = np.searchsorted(edges, hint_xs, side="right") - 1
    keep = (idx >= 0) & (idx < extrema.size) & (hint_xs > edges[0]) & (hint_xs < edges[-1])
    op = max if want_max else min
    for i, y in zip(idx[keep], hint_ys[keep]):
        if not np.isnan(y):
            extrema[i] = op(extrema[i], y)


def _cells_minmax(
    ys: np.ndarray, has_nan: bool, rows: int, cols: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-row min and max of a (rows, cols) sample block, honouring NaNs."""
    block = ys.reshape(rows, cols)
    if not has_nan:
        return block.min(axis=1), block.max(axis=1)
    with np.errstate(all="ignore"):
        mins = np.nanmin(block, axis=1)
        maxs = np.nanmax(block, axis=1)
    if np.isnan(mins).any():
        raise UndefinedSamplesError("a cell has no defined samples")
    return mins, maxs


def _sum_pair(
    f: Integrand,
    p: Partition,
    cfg: SamplingConfig,
    hints: Sequence[float] | None,
) -> tuple[float, float]:
    """(lower, upper) sampled Darboux sums over an arbitrary partition."""
    ev = as_evaluator(f)
    pts = p.points
    widths = p.widths()
    n = p.cell_count
    m = cfg.samples_per_cell
    if cfg.include_endpoints:
        offsets = np.linspace(0.0, 1.0, m)
    else:
        offsets = np.arange(1, m + 1) / (m + 1)

    lows = np.empty(n)
    highs = np.empty(n)
    chunk = max(1, _CHUNK_POINTS // m)
    for i0 in range(0, n, chunk):
        i1 = min(n, i0 + chunk)
        xs = pts[i0:i1, None] + widths[i0:i1, None] * offsets[None, :]
        if cfg.include_endpoints:
            xs[:, -1] = pts[i0 + 1 : i1 + 1]  # exact shared edges
        ys = ev(xs.ravel())
        mask = np.isnan(ys)
        has_nan = bool(mask.any())
        if has_nan:
            block_mask = mask.reshape(i1 - i0, m)
            if cfg.undefined_policy == FAIL_ON_UNDEFINED:
                raise UndefinedSamplesError("undefined sample value in partition sum")
            if (block_mask[:, :-1] & block_mask[:, 1:]).any():
                raise UndefinedSamplesError(
                    "adjacent undefined samples in partition sum"
                )
        lo, hi = _cells_minmax(ys, has_nan, i1 - i0, m)
        lows[i0:i1] = lo
        highs[i0:i1] = hi

    if hints:
        hint_xs = np.asarray(sorted(hints), dtype=float)
        hint_ys = ev(hint_xs)
        _scatter_hints(lows, pts, hint_xs, hint_ys, want_max=False)
        _scatter_hints(highs, pts, hint_xs, hint_ys, want_max=True)

    lower = compensated_sum(lows * widths)
    upper = compensated_sum(highs * widths)
    return lower, upper


def lower_sum(
    f: Integrand,
    p: Partition,
    cfg: SamplingConfig = DEFAULT_CONFIG,
    hints: Sequence[float] | None = None,
) -> float:
    """Sampled lower Darboux sum: sum of (cell minimum) * (cell width)."""
    return _sum_pair(f, p, cfg, hints)[0]


def upper_sum(
    f: Integrand,
    p: Partition,
    cfg: SamplingConfig = DEFAULT_CONFIG,
    hints: Sequence[float] | None = None,
) -> float:
    """Sampled upper Darboux sum: sum of (cell maximum) * (cell width)."""
    return _sum_pair(f, p, cfg, hints)[1]


def _uniform_bracket(
    ev: Evaluator,
    a: float,
    b: float,
    cells: int,
    cfg: SamplingConfig,
    hints: Sequence[float] | None,
) -> tuple[float, float]:
    """(lower, upper) over a uniform grid, sharing edge evaluations.

    With endpoints included, cell i's samples are the global uniform
    grid slice [i*w, i*w + w] for w = samples_per_cell - 1, so each
    distinct point is evaluated once.
    """
    if not cfg.include_endpoints:
        p = uniform_partition(Interval(a, b), cells)
        return _sum_pair(ev, p, cfg, hints)

    w = cfg.samples_per_cell - 1
    total = cells * w  # sample gaps; points = total + 1
    step = (b - a) / total
    dx = (b - a) / cells

    lo_parts: list[float] = []
    hi_parts: list[float] = []
    cells_per_chunk = max(1, _CHUNK_POINTS // w)
    hint_xs = np.asarray(sorted(hints), dtype=float) if hints else None
    hint_ys = ev(hint_xs) if hint_xs is not None and hint_xs.size else None

    for c0 in range(0, cells, cells_per_chunk):
        c1 = min(cells, c0 + cells_per_chunk)
        i0, i1 = c0 * w, c1 * w
        xs = a + step * np.arange(i0, i1 + 1)
        if c1 == cells:
            xs[-1] = b
        ys = ev(xs)
        mask = np.isnan(ys)
        has_nan = bool(mask.any())
        if has_nan:
            if cfg.undefined_policy == FAIL_ON_UNDEFINED:
                raise UndefinedSamplesError("undefined sample value in integrand")
            if (mask[:-1] & mask[1:]).any():
                raise UndefinedSamplesError("adjacent undefined samples in integrand")
            idx = np.flatnonzero(mask)
            saved = ys[idx]
            ys[idx] = np.inf
        body = ys[:-1].reshape(c1 - c0, w)
        lo = body.min(axis=1)
        hi_src = ys
        if has_nan:
            hi_src = ys.copy()
            hi_src[idx] = -np.inf
            hi_body = hi_src[:-1].reshape(c1 - c0, w)
            hi = hi_body.max(axis=1)
        else:
            hi = body.max(axis=1)
        edge_r = hi_src[w::w] if has_nan else ys[w::w]
        np.minimum(lo, ys[w::w], out=lo)
        np.maximum(hi, edge_r, out=hi)
        if has_nan:
            ys[idx] = saved
            bad = np.isinf(lo) & (lo > 0)
            if bad.any():
                raise UndefinedSamplesError("a cell has no defined samples")
        if hint_ys is not None:
            edges = a + dx * np.arange(c0, c1 + 1)
            _scatter_hints(lo, edges, hint_xs, hint_ys, want_max=False)
            _scatter_hints(hi, edges, hint_xs, hint_ys, want_max=True)
        lo_parts.append(compensated_sum(lo))
        hi_parts.append(compensated_sum(hi))

    return math.fsum(lo_parts) * dx, math.fsum(hi_parts) * dx


def integrate(
    f: Integrand,
    iv: Interval,
    tol: float,
    cfg: SamplingConfig = DEFAULT_CONFIG,
    hints: Sequence[float] | None = None,
    max_cells: int = CELL_CAP,
    start_cells: int = START_CELLS,
) -> DarbouxEstimate:
    """Refine uniform cells (doubling from 2**10) until upper - lower <= tol.

    Raises NonConvergenceError carrying the last bracket when the cap is
    reached first.  The bracket endpoints are the sampled Darboux sums of
    the final refinement; ``midpoint`` is the point estimate.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if iv.is_degenerate:
        raise ValueError("cannot integrate over a degenerate interval")
    ev = as_evaluator(f)
    cells = min(start_cells, max_cells)
    est = None
    while True:
        lower, upper = _uniform_bracket(ev, iv.a, iv.b, cells, cfg, hints)
        est = DarbouxEstimate(lower, upper, norm=iv.width / cells, cells=cells)
        gap = upper - lower
        if gap <= tol:  # NaN-safe: NaN fails the test
            return est
        if cells >= max_cells:
            raise NonConvergenceError(
                f"bracket width {gap:.3g} > tol {tol:.3g} at {cells} cells",
                est,
            )
        cells = min(cells * 2, max_cells)


def integrate_signed(
    f: Integrand,
    a: float,
    b: float,
    tol: float,
    cfg: SamplingConfig = DEFAULT_CONFIG,
    hints: Sequence[float] | None = None,
    max_cells: int = CELL_CAP,
) -> DarbouxEstimate:
    """Oriented integral: reversing the endpoints negates the estimate.

    ``a == b`` yields the zero estimate (norm 0, cells 0).
    """
    if a == b:
        return DarbouxEstimate(0.0, 0.0, norm=0.0, cells=0)
    if a < b:
        return integrate(f, Interval(a, b), tol, cfg, hints, max_cells)
    return -integrate(f, Interval(b, a), tol, cfg, hints, max_cells)

"""Numerically verify both sides of the substitution identity.

For f, a substitution map phi and endpoints alpha < beta, the two
integrals compared are the oriented integral of f between phi(alpha)
and phi(beta), and the integral of (f o phi) * phi' over [alpha, beta].
Both sides are bracketed independently; the report carries the brackets,
their midpoint difference, and heuristic hypothesis diagnostics.

Hypothesis checks are sampling heuristics: boundedness and continuity
verdicts come from grids, and genuinely measure-theoretic conditions
(almost-everywhere continuity) are always reported as undecidable
numerically rather than guessed.

phi' at the endpoints (or at isolated interior points) may fail to
exist; the quadrature skips isolated undefined samples, which realises
the freedom to assign such values arbitrarily without changing the
integral.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import darboux
from .darboux import (
    CELL_CAP,
    DEFAULT_CONFIG,
    DarbouxEstimate,
    Evaluator,
    NonConvergenceError,
    SamplingConfig,
    UndefinedSamplesError,
    as_evaluator,
    integrate_signed,
)
from .expr import Expr, NonDifferentiableError, differentiate, evaluate, variables
from .partition import Interval

__all__ = [
    "SubstitutionProblem",
    "HypothesisCheck",
    "HypothesisReport",
    "SubstitutionReport",
    "VERIFIED",
    "MISMATCH",
    "INCONCLUSIVE",
    "PASS",
    "FAIL",
    "UNDECIDABLE",
    "lhs_integral",
    "rhs_integral",
    "verify",
    "check_hypotheses",
    "verify_zero_extension",
    "report_to_json",
    "thread_budget",
]

VERIFIED = "verified"
MISMATCH = "mismatch"
INCONCLUSIVE = "inconclusive"

PASS = "pass"
FAIL = "fail"
UNDECIDABLE = "undecidable-numerically"

_OVERFLOW_LIMIT = 1e15
_GROWTH_LIMIT = 10.0


def thread_budget() -> int:
    """QUADRATURA_THREADS caps internal parallelism; 0 or unset means serial."""
    raw = os.environ.get("QUADRATURA_THREADS", "0")
    try:
        return max(0, int(raw))
    except ValueError:
        return 0


@dataclass(frozen=True, slots=True)
class SubstitutionProblem:
    """One identity instance: f in x, phi in t, endpoints alpha < beta.

    ``phi_prime`` overrides the symbolic derivative when given; when phi
    is not symbolically differentiable the engine falls back to central
    differences with step 1e-7 * (beta - alpha).  ``f_domain`` optionally
    declares the interval [a, b] that phi is expected to map onto
    (endpoint diagnostics only).
    """

    f: Expr
    phi: Expr
    alpha: float
    beta: float
    phi_prime: Expr | None = None
    f_domain: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.alpha < self.beta:
            raise ValueError(f"need alpha < beta, got [{self.alpha}, {self.beta}]")

    @property
    def span(self) -> float:
        return self.beta - self.alpha

    def phi_prime_evaluator(self) -> Evaluator:
        if self.phi_prime is not None:
            return as_evaluator(self.phi_prime)
        try:
            return as_evaluator(differentiate(self.phi))
        except NonDifferentiableError:
            pass
        phi_ev = as_evaluator(self.phi)
        h = 1e-7 * self.span

        def central(ts: np.ndarray) -> np.ndarray:
            return (phi_ev(ts + h) - phi_ev(ts - h)) / (2.0 * h)

        return central

    def product_evaluator(self) -> Evaluator:
        f_ev = as_evaluator(self.f)
        phi_ev = as_evaluator(self.phi)
        dphi_ev = self.phi_prime_evaluator()

        def product(ts: np.ndarray) -> np.ndarray:
            return f_ev(phi_ev(ts)) * dphi_ev(ts)

        return product

    def image_endpoints(self) -> tuple[float, float]:
        u = _endpoint_value(as_evaluator(self.phi), self.alpha, +1.0, self.span)
        v = _endpoint_value(as_evaluator(self.phi), self.beta, -1.0, self.span)
        return u, v


@dataclass(frozen=True, slots=True)
class HypothesisCheck:
    name: str
    verdict: str
    witness: dict

    def to_json(self) -> dict:
        return {"name": self.name, "verdict": self.verdict, "witness": self.witness}


@dataclass(frozen=True, slots=True)
class HypothesisReport:
    checks: tuple[HypothesisCheck, ...]

    def verdict(self, name: str) -> str:
        for c in self.checks:
            if c.name == name:
                return c.verdict
        raise KeyError(name)

    def __iter__(self):
        return iter(self.checks)

    def to_json(self) -> list[dict]:
        return [c.to_json() for c in self.checks]


@dataclass(frozen=True, slots=True)
class SubstitutionReport:
    lhs: DarbouxEstimate | None
    rhs: DarbouxEstimate | None
    abs_diff: float
    tol: float
    hypotheses: HypothesisReport
    verdict: str
    reason: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return report_to_json(self)


def report_to_json(report: SubstitutionReport) -> dict:
    def est(e: DarbouxEstimate | None):
        if e is None:
            return None
        return {"lower": e.lower, "upper": e.upper}

    return {
        "lhs": est(report.lhs),
        "rhs": est(report.rhs),
        "abs_diff": report.abs_diff,
        "tol": report.tol,
        "hypotheses": report.hypotheses.to_json(),
        "verdict": report.verdict,
    }


def _endpoint_value(phi_ev: Evaluator, t: float, inward: float, span: float) -> float:
    """phi(t), probing just inside the interval when t itself is undefined."""
    v = float(phi_ev(np.array([t]))[0])
    if not math.isnan(v):
        return v
    for scale in (1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6):
        v = float(phi_ev(np.array([t + inward * scale * span]))[0])
        if not math.isnan(v):
            return v
    raise UndefinedSamplesError(f"phi is undefined at and near t = {t}")


def lhs_integral(
    p: SubstitutionProblem,
    tol: float,
    cfg: SamplingConfig = DEFAULT_CONFIG,
    max_cells: int = CELL_CAP,
) -> DarbouxEstimate:
    """Oriented integral of f between phi(alpha) and phi(beta).

    Reversed image endpoints negate the estimate; equal ones give the
    zero estimate.
    """
    u, v = p.image_endpoints()
    return integrate_signed(p.f, u, v, tol, cfg, max_cells=max_cells)


def rhs_integral(
    p: SubstitutionProblem,
    tol: float,
    cfg: SamplingConfig = DEFAULT_CONFIG,
    max_cells: int = CELL_CAP,
) -> DarbouxEstimate:
    """Bracket for the integral of (f o phi) * phi' over [alpha, beta]."""
    return darboux.integrate(
        p.product_evaluator(),
        Interval(p.alpha, p.beta),
        tol,
        cfg,
        max_cells=max_cells,
    )


def verify(
    p: SubstitutionProblem,
    tol: float = 1e-6,
    cfg: SamplingConfig = DEFAULT_CONFIG,
    grid_size: int = 1000,
    max_cells: int = CELL_CAP,
) -> SubstitutionReport:
    """Run both integrals at tol/2 each and compare.

    verified  <=> both brackets closed and |lhs - rhs| <= tol
    mismatch  <=> both closed and the difference exceeds tol
    inconclusive otherwise (the reason and any partial bracket are kept).
    """
    hypotheses = check_hypotheses(p, grid_size)
    side_tol = tol / 2.0

    def run_lhs():
        return lhs_integral(p, side_tol, cfg, max_cells)

    def run_rhs():
        return rhs_integral(p, side_tol, cfg, max_cells)

    lhs = rhs = None
    reasons = []
    if thread_budget() >= 2:
        with ThreadPoolExecutor(max_workers=2) as pool:
            futures = (pool.submit(run_lhs), pool.submit(run_rhs))
            results = []
            for name, fut in zip(("lhs", "rhs"), futures):
                try:
                    results.append(fut.result())
                except (NonConvergenceError, ValueError) as exc:
                    results.append(exc)
                    reasons.append(f"{name}: {exc}")
            lhs, rhs = results
    else:
        for name, runner in (("lhs", run_lhs), ("rhs", run_rhs)):
            try:
                result = runner()
            except (NonConvergenceError, ValueError) as exc:
                result = exc
                reasons.append(f"{name}: {exc}")
            if name == "lhs":
                lhs = result
            else:
                rhs = result

    def settle(x):
        if isinstance(x, NonConvergenceError):
            return x.estimate, False
        if isinstance(x, DarbouxEstimate):
            return x, True
        return None, False

    lhs_est, lhs_ok = settle(lhs)
    rhs_est, rhs_ok = settle(rhs)
    if lhs_est is not None and rhs_est is not None:
        abs_diff = abs(lhs_est.midpoint - rhs_est.midpoint)
    else:
        abs_diff = math.nan
    if lhs_ok and rhs_ok:
        verdict = VERIFIED if abs_diff <= tol else MISMATCH
    else:
        verdict = INCONCLUSIVE
    return SubstitutionReport(
        lhs=lhs_est,
        rhs=rhs_est,
        abs_diff=abs_diff,
        tol=tol,
        hypotheses=hypotheses,
        verdict=verdict,
        reason="; ".join(reasons),
    )


def verify_zero_extension(
    p: SubstitutionProblem,
    tol: float = 1e-6,
    cfg: SamplingConfig = DEFAULT_CONFIG,
    grid_size: int = 1000,
    max_cells: int = CELL_CAP,
) -> SubstitutionReport:
    """Four-way identity with f zeroed outside the image interval J.

    g = f * (indicator of J).  Checks that the J-integrals of f and g
    and the [alpha, beta]-integrals of the two products all agree within
    tol.  Assumes the preimage of the J endpoints has measure zero; that
    condition is not checkable numerically and is not checked.
    """
    hypotheses = check_hypotheses(p, grid_size)
    u, v = p.image_endpoints()
    j_lo, j_hi = min(u, v), max(u, v)
    f_ev = as_evaluator(p.f)
    phi_ev = as_evaluator(p.phi)
    dphi_ev = p.phi_prime_evaluator()

    def g_ev(xs: np.ndarray) -> np.ndarray:
        inside = (xs >= j_lo) & (xs <= j_hi)
        return np.where(inside, f_ev(xs), 0.0)

    def g_product(ts: np.ndarray) -> np.ndarray:
        return g_ev(phi_ev(ts)) * dphi_ev(ts)

    side_tol = tol / 2.0
    try:
        if u == v:
            zero = DarbouxEstimate(0.0, 0.0, 0.0, 0)
            g_lhs = f_lhs = zero
        else:
            g_lhs = integrate_signed(g_ev, u, v, side_tol, cfg, max_cells=max_cells)
            f_lhs = integrate_signed(p.f, u, v, side_tol, cfg, max_cells=max_cells)
        t_iv = Interval(p.alpha, p.beta)
        f_rhs = darboux.integrate(
            p.product_evaluator(), t_iv, side_tol, cfg, max_cells=max_cells
        )
        g_rhs = darboux.integrate(g_product, t_iv, side_tol, cfg, max_cells=max_cells)
    except (NonConvergenceError, ValueError) as exc:
        return SubstitutionReport(
            lhs=None,
            rhs=None,
            abs_diff=math.nan,
            tol=tol,
            hypotheses=hypotheses,
            verdict=INCONCLUSIVE,
            reason=str(exc),
        )

    mids = [g_lhs.midpoint, f_lhs.midpoint, f_rhs.midpoint, g_rhs.midpoint]
    abs_diff = max(mids) - min(mids)
    verdict = VERIFIED if abs_diff <= tol else MISMATCH
    return SubstitutionReport(
        lhs=g_lhs,
        rhs=g_rhs,
        abs_diff=abs_diff,
        tol=tol,
        hypotheses=hypotheses,
        verdict=verdict,
        extra={
            "g_over_J": g_lhs.midpoint,
            "f_over_J": f_lhs.midpoint,
            "f_product": f_rhs.midpoint,
            "g_product": g_rhs.midpoint,
        },
    )


# ---------------------------------------------------------------------------
# Hypothesis heuristics


def _finite_stats(ys: np.ndarray) -> tuple[float, int]:
    finite = ys[np.isfinite(ys)]
    if finite.size == 0:
        return math.nan, 0
    return float(np.abs(finite).max()), int(finite.size)


def _window_maxima(ev: Evaluator, lo: float, hi: float, at_left: bool) -> list[float]:
    """max |value| over nested windows shrinking geometrically into an endpoint."""
    width = hi - lo
    out = []
    for j in range(9):
        w_far = width * 10.0 ** (-j)
        w_near = width * 10.0 ** (-j - 1)
        if at_left:
            xs = np.linspace(lo + w_near, lo + w_far, 64)
        else:
            xs = np.linspace(hi - w_far, hi - w_near, 64)
        m, count = _finite_stats(ev(xs))
        out.append(m if count else math.nan)
    return out


def _bounded_verdict(ev: Evaluator, lo: float, hi: float, grid_size: int) -> HypothesisCheck:
    xs = np.linspace(lo, hi, grid_size)
    grid_max, defined = _finite_stats(ev(xs))
    witness: dict = {"grid_max": grid_max, "defined_samples": defined}
    if defined == 0:
        return HypothesisCheck("", FAIL, witness)  # name filled by caller
    diverging = bool(np.isinf(ev(xs)).any()) or grid_max >= _OVERFLOW_LIMIT
    for side, at_left in (("left", True), ("right", False)):
        maxima = _window_maxima(ev, lo, hi, at_left)
        witness[f"{side}_window_maxima"] = maxima
        clean = [m for m in maxima if not math.isnan(m)]
        if len(clean) >= 2:
            first, last = clean[0], clean[-1]
            if last >= _OVERFLOW_LIMIT or last > _GROWTH_LIMIT * max(first, 1e-12):
                diverging = True
    return HypothesisCheck("", FAIL if diverging else PASS, witness)


def _modulus(ev: Evaluator, lo: float, hi: float, n: int) -> float:
    ys = ev(np.linspace(lo, hi, n))
    diffs = np.abs(np.diff(ys))
    diffs = diffs[np.isfinite(diffs)]
    return float(diffs.max()) if diffs.size else math.nan


def _continuity_verdict(ev: Evaluator, lo: float, hi: float, grid_size: int) -> HypothesisCheck:
    mods = [_modulus(ev, lo, hi, k * grid_size) for k in (1, 2, 4)]
    witness = {"sampled_moduli": mods}
    if any(math.isnan(m) for m in mods):
        return HypothesisCheck("", UNDECIDABLE, witness)
    scale = 1.0 + max(mods)
    shrinking = mods[2] <= max(0.8 * mods[0], 1e-9 * scale)
    return HypothesisCheck("", PASS if shrinking else FAIL, witness)


def check_hypotheses(p: SubstitutionProblem, grid_size: int = 1000) -> HypothesisReport:
    """Grid diagnostics for the identity's hypotheses.

    Boundedness: no overflow-scale values and no divergence trend toward
    either endpoint (growth across the probed endpoint decades below
    10x).  Continuity: the sampled modulus of continuity shrinks under
    grid refinement.  Almost-everywhere conditions are never decided.
    """
    if grid_size < 100:
        raise ValueError(f"grid_size must be >= 100, got {grid_size}")
    lo, hi = p.alpha, p.beta
    checks: list[HypothesisCheck] = []

    c = _continuity_verdict(as_evaluator(p.phi), lo, hi, grid_size)
    checks.append(HypothesisCheck("phi_continuous", c.verdict, c.witness))

    b = _bounded_verdict(p.phi_prime_evaluator(), lo, hi, grid_size)
    checks.append(HypothesisCheck("phi_prime_bounded", b.verdict, b.witness))

    b = _bounded_verdict(p.product_evaluator(), lo, hi, grid_size)
    checks.append(HypothesisCheck("product_bounded", b.verdict, b.witness))

    try:
        u, v = p.image_endpoints()
        j_lo, j_hi = min(u, v), max(u, v)
        if j_lo == j_hi:
            checks.append(
                HypothesisCheck("f_bounded_on_J", PASS, {"degenerate_J": j_lo})
            )
        else:
            b = _bounded_verdict(as_evaluator(p.f), j_lo, j_hi, grid_size)
            checks.append(HypothesisCheck("f_bounded_on_J", b.verdict, b.witness))
        endpoint_witness = {"phi_alpha": u, "phi_beta": v}
        if p.f_domain is not None:
            a, b_ = p.f_domain
            scale = max(abs(a), abs(b_), 1.0)
            hit = abs(u - a) <= 1e-12 * scale and abs(v - b_) <= 1e-12 * scale
            endpoint_witness["declared_domain"] = list(p.f_domain)
            checks.append(
                HypothesisCheck(
                    "endpoints_hit_domain", PASS if hit else FAIL, endpoint_witness
                )
            )
        else:
            checks.append(
                HypothesisCheck("endpoints_hit_domain", UNDECIDABLE, endpoint_witness)
            )
    except UndefinedSamplesError as exc:
        checks.append(HypothesisCheck("f_bounded_on_J", UNDECIDABLE, {"error": str(exc)}))
        checks.append(
            HypothesisCheck("endpoints_hit_domain", UNDECIDABLE, {"error": str(exc)})
        )

    for name in ("phi_prime_ae_continuous", "f_ae_continuous"):
        checks.append(
            HypothesisCheck(
                name,
                UNDECIDABLE,
                {"note": "no finite sample distinguishes a.e. conditions"},
            )
        )
    return HypothesisReport(tuple(checks))

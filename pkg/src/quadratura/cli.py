"""Batch command-line front end.

Subcommands: integrate, substitute, improper, approx, diff, gallery.
Each prints a JSON report on stdout (CSV where noted) and exits 0 on
success/verified, 1 on usage or parse errors, 2 on numerical
non-convergence, mismatch or resource limits.

The improper runner truncates each side on its own schedule: finite open
endpoints are approached geometrically (offset * 2^-k) and infinite ones
through doubling cutoffs (base * 2^k).  A side counts as converged when
three consecutive truncation values differ by less than its tolerance;
a stable geometric tail is also extrapolated (Aitken) and the
extrapolated value is preferred when trustworthy.

The environment variable QUADRATURA_THREADS caps internal parallelism
(0 or unset = serial).
"""

from __future__ import annotations

import argparse
import csv as _csv
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import approximant, changevar, darboux, expr
from .changevar import INCONCLUSIVE, MISMATCH, VERIFIED, SubstitutionProblem
from .darboux import CELL_CAP, DarbouxEstimate, NonConvergenceError, SamplingConfig
from .expr import ParseError
from .partition import Interval, ResourceLimitError

__all__ = [
    "main",
    "GalleryEntry",
    "GALLERY",
    "ImproperSchedule",
    "ImproperSide",
    "ImproperReport",
    "improper_verify",
    "run_gallery",
]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2


# ---------------------------------------------------------------------------
# Improper integrals


@dataclass(frozen=True, slots=True)
class ImproperSchedule:
    """Truncation schedule for one pair of endpoints.

    Open finite endpoints are approached as ``endpoint -+ offset * 2^-k``;
    infinite ones are cut off at ``-+ cutoff_base * 2^k``.  Closed
    endpoints stay fixed.  The sequences are strictly monotone toward
    the limits.
    """

    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False
    offset: float = 0.25
    cutoff_base: float = 1.0
    max_steps: int = 40
    tol: float = 1e-6

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if math.isinf(self.lo) and not self.lo_open:
            object.__setattr__(self, "lo_open", True)
        if math.isinf(self.hi) and not self.hi_open:
            object.__setattr__(self, "hi_open", True)
        if self.offset <= 0 or self.cutoff_base <= 0:
            raise ValueError("offset and cutoff_base must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    @property
    def any_open(self) -> bool:
        return self.lo_open or self.hi_open

    def truncation(self, k: int) -> tuple[float, float]:
        if self.lo_open:
            u = -self.cutoff_base * 2.0**k if math.isinf(self.lo) else self.lo + self.offset * 2.0**-k
        else:
            u = self.lo
        if self.hi_open:
            v = self.cutoff_base * 2.0**k if math.isinf(self.hi) else self.hi - self.offset * 2.0**-k
        else:
            v = self.hi
        return u, v


@dataclass(slots=True)
class ImproperSide:
    """Per-truncation trail for one side of the identity."""

    steps: list[dict] = field(default_factory=list)
    value: float = math.nan
    last: float = math.nan
    extrapolated: float | None = None
    converged: bool = False
    stable_trend: bool = False
    error: str = ""

    @property
    def usable(self) -> bool:
        return bool(self.steps) and (self.converged or self.stable_trend)

    def to_json(self) -> dict:
        return {
            "steps": self.steps,
            "value": self.value,
            "last": self.last,
            "extrapolated": self.extrapolated,
            "converged": self.converged,
            "stable_trend": self.stable_trend,
            "error": self.error,
        }


def _aitken(values: list[float]) -> tuple[float | None, bool]:
    """(extrapolated limit, trend is stably geometric) from the last values."""
    if len(values) < 4:
        return None, False
    d = np.diff(np.asarray(values[-4:]))
    if (d == 0).any():
        return None, False
    r1, r2 = d[1] / d[0], d[2] / d[1]
    if not (0.05 <= r2 <= 0.95 and 0.05 <= r1 <= 0.95 and abs(r2 - r1) <= 0.25):
        return None, False
    limit = values[-1] + d[2] * r2 / (1.0 - r2)
    return float(limit), True


def _run_side(
    ev,
    schedule: ImproperSchedule,
    inner_tol: float,
    cfg: SamplingConfig,
    max_cells: int,
    sign: float = 1.0,
) -> ImproperSide:
    side = ImproperSide()
    values: list[float] = []
    for k in range(schedule.max_steps):
        u, v = schedule.truncation(k)
        if not u < v:
            side.error = f"schedule degenerate at step {k}"
            break
        try:
            est = darboux.integrate(ev, Interval(u, v), inner_tol, cfg, max_cells=max_cells)
        except (NonConvergenceError, ValueError) as exc:
            side.error = f"step {k} on [{u:.6g}, {v:.6g}]: {exc}"
            break
        value = sign * est.midpoint
        values.append(value)
        side.steps.append(
            {
                "step": k,
                "lo": u,
                "hi": v,
                "value": value,
                "bracket_width": est.width,
                "cells": est.cells,
            }
        )
        if not schedule.any_open:
            side.converged = True
            break
        if len(values) >= 4:
            d = np.abs(np.diff(values[-4:]))
            if (d < schedule.tol).all():
                side.converged = True
                break
    if values:
        side.last = values[-1]
        ext, stable = _aitken(values)
        side.extrapolated = ext
        side.stable_trend = stable
        side.value = ext if (stable and ext is not None) else side.last
    return side


@dataclass(slots=True)
class ImproperReport:
    rhs: ImproperSide
    lhs: ImproperSide
    image_lo: float
    image_hi: float
    orientation: float
    abs_diff: float
    tol: float
    verdict: str

    def to_json(self) -> dict:
        return {
            "rhs": self.rhs.to_json(),
            "lhs": self.lhs.to_json(),
            "image": {"lo": self.image_lo, "hi": self.image_hi, "orientation": self.orientation},
            "abs_diff": self.abs_diff,
            "tol": self.tol,
            "verdict": self.verdict,
        }


def _image_limit(phi_ev, ts: list[float]) -> float:
    vals = [float(phi_ev(np.array([t]))[0]) for t in ts]
    vals = [v for v in vals if not math.isnan(v)]
    if not vals:
        raise ValueError("phi undefined along the probe sequence")
    if len(vals) >= 2 and abs(vals[-1]) > 1e8 and abs(vals[-1]) > 2.0 * abs(vals[0]):
        return math.copysign(math.inf, vals[-1])
    return vals[-1]


def improper_verify(
    p: SubstitutionProblem,
    t_schedule: ImproperSchedule,
    tol: float,
    rhs_inner_tol: float,
    lhs_inner_tol: float,
    lhs_offset: float | None = None,
    lhs_cutoff_base: float = 1.0,
    lhs_max_steps: int | None = None,
    lhs_tol: float | None = None,
    cfg: SamplingConfig = SamplingConfig(samples_per_cell=2),
    max_cells: int = CELL_CAP,
) -> ImproperReport:
    """Truncate both sides toward their improper endpoints and compare.

    The t side integrates (f o phi) phi' over the ``t_schedule``
    truncations.  The x side integrates f over its own schedule built on
    the probed limits of phi (finite limits approached geometrically,
    infinite ones through doubling cutoffs), oriented by the direction
    of phi.
    """
    rhs = _run_side(p.product_evaluator(), t_schedule, rhs_inner_tol, cfg, max_cells)

    phi_ev = changevar.as_evaluator(p.phi)
    probe_ks = (0, 6, 12, 18, 24, 30, 36)
    lo_probes = [t_schedule.truncation(k)[0] for k in probe_ks]
    hi_probes = [t_schedule.truncation(k)[1] for k in probe_ks]
    lhs = ImproperSide()
    image_a = image_b = math.nan
    orientation = 1.0
    try:
        image_a = _image_limit(phi_ev, lo_probes)
        image_b = _image_limit(phi_ev, hi_probes)
    except ValueError as exc:
        lhs.error = str(exc)

    if not lhs.error:
        if image_a == image_b:
            lhs.value = lhs.last = 0.0
            lhs.converged = True
            lhs.steps.append({"step": 0, "lo": image_a, "hi": image_b, "value": 0.0,
                              "bracket_width": 0.0, "cells": 0})
        else:
            orientation = 1.0 if image_a < image_b else -1.0
            x_lo, x_hi = min(image_a, image_b), max(image_a, image_b)
            f_ev = changevar.as_evaluator(p.f)

            def endpoint_open(x: float, t_open: bool) -> bool:
                if math.isinf(x):
                    return True
                if t_open:
                    return True
                return math.isnan(float(f_ev(np.array([x]))[0]))

            lo_open = endpoint_open(x_lo, t_schedule.lo_open if orientation > 0 else t_schedule.hi_open)
            hi_open = endpoint_open(x_hi, t_schedule.hi_open if orientation > 0 else t_schedule.lo_open)
            width = x_hi - x_lo
            offset = lhs_offset
            if offset is None:
                offset = width / 4.0 if math.isfinite(width) else 0.25
            x_schedule = ImproperSchedule(
                lo=x_lo,
                hi=x_hi,
                lo_open=lo_open,
                hi_open=hi_open,
                offset=offset,
                cutoff_base=lhs_cutoff_base,
                max_steps=lhs_max_steps if lhs_max_steps is not None else t_schedule.max_steps,
                tol=lhs_tol if lhs_tol is not None else t_schedule.tol,
            )
            lhs = _run_side(f_ev, x_schedule, lhs_inner_tol, cfg, max_cells, sign=orientation)

    if rhs.steps and lhs.steps:
        abs_diff = abs(rhs.value - lhs.value)
    else:
        abs_diff = math.nan
    if rhs.usable and lhs.usable and abs_diff <= tol:
        verdict = VERIFIED
    elif rhs.usable and lhs.usable and abs_diff > tol:
        verdict = MISMATCH
    else:
        verdict = INCONCLUSIVE
    return ImproperReport(
        rhs=rhs,
        lhs=lhs,
        image_lo=image_a,
        image_hi=image_b,
        orientation=orientation,
        abs_diff=abs_diff,
        tol=tol,
        verdict=verdict,
    )


# ---------------------------------------------------------------------------
# Gallery


@dataclass(frozen=True, slots=True)
class GalleryEntry:
    """A shipped example; ``expected`` is a formula, evaluated at run time."""

    id: str
    f: str
    phi: str
    alpha: float
    beta: float
    expected: str
    tol: float
    improper: bool = False


GALLERY: tuple[GalleryEntry, ...] = (
    GalleryEntry(
        id="E1",
        f="x^3",
        phi="t*sin(1/t)",
        alpha=0.0,
        beta=2.0 / math.pi,
        expected="4/pi^4",
        tol=5e-4,
    ),
    GalleryEntry(
        id="E2",
        f="x/(x^4+1)",
        phi="sqrt(t)",
        alpha=0.0,
        beta=1.0,
        expected="pi/8",
        tol=1e-7,
    ),
    GalleryEntry(
        id="E3",
        f="1/(x^2+1)",
        phi="tan(t)",
        alpha=-math.pi / 2.0,
        beta=math.pi / 2.0,
        expected="pi",
        tol=1.5e-3,
        improper=True,
    ),
)

# Engine knobs per entry: sampling density and internal tolerances are
# tuned to each integrand (E1's product oscillates, so it gets the dense
# sampling; E2 and E3 are piecewise monotone and run on cell edges).
GALLERY_PROFILES: dict[str, dict] = {
    "E1": {"samples": 64, "verify_tol": 5e-4},
    "E2": {"samples": 2, "verify_tol": 1e-5},
    "E3": {
        "samples": 2,
        "t_offset": math.pi / 4.0,
        "rhs_tol": 1e-9,
        "rhs_inner_tol": 2.5e-10,
        "lhs_tol": 1.5e-3,
        "lhs_inner_tol": 2e-2,
        "lhs_cutoff_base": 125.0,
        "lhs_max_steps": 5,
        "max_steps": 40,
    },
}


def expected_value(entry: GalleryEntry) -> float:
    return expr.evaluate(expr.parse(entry.expected), 0.0)


def _entry_problem(entry: GalleryEntry) -> SubstitutionProblem:
    return SubstitutionProblem(
        f=expr.parse(entry.f),
        phi=expr.parse(entry.phi),
        alpha=entry.alpha,
        beta=entry.beta,
    )


def run_gallery_entry(
    entry: GalleryEntry,
    tol_override: float | None = None,
    samples_override: int | None = None,
    max_cells: int = CELL_CAP,
) -> dict:
    """Run one entry end to end; returns a result row."""
    profile = GALLERY_PROFILES[entry.id]
    expected = expected_value(entry)
    tol = entry.tol if tol_override is None else tol_override
    samples = profile.get("samples", 2) if samples_override is None else samples_override
    cfg = SamplingConfig(samples_per_cell=samples)
    problem = _entry_problem(entry)

    if entry.improper:
        schedule = ImproperSchedule(
            lo=entry.alpha,
            hi=entry.beta,
            lo_open=True,
            hi_open=True,
            offset=profile.get("t_offset", (entry.beta - entry.alpha) / 4.0),
            max_steps=profile.get("max_steps", 40),
            tol=profile["rhs_tol"] if tol_override is None else tol_override,
        )
        report = improper_verify(
            problem,
            schedule,
            tol=tol,
            rhs_inner_tol=profile.get("rhs_inner_tol", tol / 4.0),
            lhs_inner_tol=profile.get("lhs_inner_tol", tol / 4.0),
            lhs_cutoff_base=profile.get("lhs_cutoff_base", 1.0),
            lhs_max_steps=profile.get("lhs_max_steps"),
            lhs_tol=profile.get("lhs_tol", tol),
            cfg=cfg,
            max_cells=max_cells,
        )
        lhs_value, rhs_value = report.lhs.value, report.rhs.value
        verdict = report.verdict
        detail = report.to_json()
    else:
        verify_tol = profile.get("verify_tol", tol) if tol_override is None else tol_override
        report = changevar.verify(problem, verify_tol, cfg, max_cells=max_cells)
        lhs_value = report.lhs.midpoint if report.lhs else math.nan
        rhs_value = report.rhs.midpoint if report.rhs else math.nan
        verdict = report.verdict
        detail = report.to_json()

    lhs_err = abs(lhs_value - expected)
    rhs_err = abs(rhs_value - expected)
    ok = verdict == VERIFIED and lhs_err <= tol and rhs_err <= tol
    return {
        "id": entry.id,
        "expected": expected,
        "lhs": lhs_value,
        "rhs": rhs_value,
        "lhs_error": lhs_err,
        "rhs_error": rhs_err,
        "tol": tol,
        "verdict": verdict,
        "pass": ok,
        "detail": detail,
    }


def run_gallery(
    only: str | None = None,
    tol_override: float | None = None,
    samples_override: int | None = None,
    max_cells: int = CELL_CAP,
) -> list[dict]:
    rows = []
    for entry in GALLERY:
        if only is not None and entry.id != only:
            continue
        rows.append(run_gallery_entry(entry, tol_override, samples_override, max_cells))
    return rows


# ---------------------------------------------------------------------------
# Command implementations


def _emit(payload, args) -> None:
    text = json.dumps(payload, indent=2)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _emit_text(text: str, args) -> None:
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text, end="")


def _steps_csv(report: ImproperReport) -> str:
    buf = io.StringIO()
    writer = _csv.writer(buf)
    writer.writerow(["side", "step", "lo", "hi", "value", "bracket_width", "cells"])
    for side_name, side in (("rhs", report.rhs), ("lhs", report.lhs)):
        for s in side.steps:
            writer.writerow(
                [side_name, s["step"], repr(s["lo"]), repr(s["hi"]),
                 repr(s["value"]), repr(s["bracket_width"]), s["cells"]]
            )
    return buf.getvalue()


def _gallery_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = _csv.writer(buf)
    writer.writerow(["id", "lhs", "rhs", "expected", "lhs_error", "rhs_error",
                     "tol", "verdict", "pass"])
    for r in rows:
        writer.writerow(
            [r["id"], repr(r["lhs"]), repr(r["rhs"]), repr(r["expected"]),
             repr(r["lhs_error"]), repr(r["rhs_error"]), repr(r["tol"]),
             r["verdict"], r["pass"]]
        )
    return buf.getvalue()


def _estimate_json(est: DarbouxEstimate) -> dict:
    return {
        "lower": est.lower,
        "upper": est.upper,
        "midpoint": est.midpoint,
        "norm": est.norm,
        "cells": est.cells,
    }


def _parse_formula(text: str, what: str) -> expr.Expr:
    try:
        return expr.parse(text)
    except ParseError as exc:
        raise SystemExit(_usage_error(f"cannot parse {what}: {exc}"))


def _usage_error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


def _cfg_from(args) -> SamplingConfig:
    return SamplingConfig(samples_per_cell=args.samples)


def cmd_integrate(args) -> int:
    f = _parse_formula(args.f, "--f")
    try:
        est = darboux.integrate_signed(
            f, args.a, args.b, args.tol, _cfg_from(args), max_cells=args.max_cells
        )
    except NonConvergenceError as exc:
        payload = _estimate_json(exc.estimate)
        payload["error"] = str(exc)
        _emit(payload, args)
        return EXIT_NUMERIC
    except ValueError as exc:
        return _usage_error(str(exc))
    _emit(_estimate_json(est), args)
    return EXIT_OK


def cmd_substitute(args) -> int:
    problem = SubstitutionProblem(
        f=_parse_formula(args.f, "--f"),
        phi=_parse_formula(args.phi, "--phi"),
        alpha=args.alpha,
        beta=args.beta,
        phi_prime=_parse_formula(args.phi_prime, "--phi-prime") if args.phi_prime else None,
    )
    report = changevar.verify(
        problem, args.tol, _cfg_from(args), grid_size=args.grid_size, max_cells=args.max_cells
    )
    _emit(report.to_json(), args)
    return EXIT_OK if report.verdict == VERIFIED else EXIT_NUMERIC


def cmd_improper(args) -> int:
    lo = float(args.alpha)
    hi = float(args.beta)
    lo_open = args.open_alpha or math.isinf(lo)
    hi_open = args.open_beta or math.isinf(hi)
    if not (lo_open or hi_open):
        return _usage_error("improper needs at least one open or infinite endpoint")
    span = (hi - lo) if (math.isfinite(lo) and math.isfinite(hi)) else 1.0
    schedule = ImproperSchedule(
        lo=lo,
        hi=hi,
        lo_open=lo_open,
        hi_open=hi_open,
        offset=args.offset if args.offset is not None else span / 4.0,
        cutoff_base=args.cutoff_base,
        max_steps=args.steps,
        tol=args.tol,
    )
    first_lo, first_hi = schedule.truncation(0)
    problem = SubstitutionProblem(
        f=_parse_formula(args.f, "--f"),
        phi=_parse_formula(args.phi, "--phi"),
        alpha=first_lo,
        beta=first_hi,
    )
    inner = args.inner_tol if args.inner_tol is not None else max(args.tol / 4.0, 1e-12)
    lhs_inner = args.lhs_inner_tol if args.lhs_inner_tol is not None else inner
    report = improper_verify(
        problem,
        schedule,
        tol=args.tol,
        rhs_inner_tol=inner,
        lhs_inner_tol=lhs_inner,
        lhs_offset=args.lhs_offset,
        lhs_cutoff_base=args.lhs_cutoff_base,
        lhs_max_steps=args.lhs_steps,
        lhs_tol=args.lhs_tol,
        cfg=_cfg_from(args),
        max_cells=args.max_cells,
    )
    if args.csv:
        _emit_text(_steps_csv(report), args)
    else:
        _emit(report.to_json(), args)
    return EXIT_OK if report.verdict == VERIFIED else EXIT_NUMERIC


def cmd_approx(args) -> int:
    f = _parse_formula(args.f, "--f")
    iv = Interval(args.a, args.b)
    cfg = _cfg_from(args)
    try:
        g = approximant.build_approximant(f, iv, args.n, cfg)
    except (ResourceLimitError, approximant.NegativityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        return _usage_error(str(exc))
    if args.out:
        approximant.write_csv(g, args.out)
    summary = {
        "level": args.n,
        "knots": int(g.knots.size),
        "value_min": float(g.values.min()),
        "value_max": float(g.values.max()),
        "integral": approximant.integrate_pl(g, iv.a, iv.b),
        "csv": args.out or None,
    }
    if args.n >= 3:
        from .partition import uniform_partition

        blocks = uniform_partition(iv, 2**args.n)
        s = darboux.lower_sum(f, blocks, cfg)
        dense = SamplingConfig(samples_per_cell=4097)
        m_sup = darboux.supremum_on(f, iv, dense)
        deficit = s - summary["integral"]
        bound = m_sup * iv.width / args.n
        summary.update(
            {
                "block_lower_sum": s,
                "deficit": deficit,
                "deficit_bound": bound,
                "deficit_within_bound": bool(-1e-9 <= deficit <= bound + 1e-9),
            }
        )
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_diff(args) -> int:
    f = _parse_formula(args.f, "--f")
    try:
        d = expr.differentiate(f, args.var)
    except (expr.NonDifferentiableError, ValueError) as exc:
        return _usage_error(str(exc))
    payload = {"input": expr.to_text(f), "derivative": expr.to_text(d)}
    if args.json:
        _emit(payload, args)
    else:
        print(payload["derivative"])
    return EXIT_OK


def cmd_gallery(args) -> int:
    rows = run_gallery(
        only=args.only,
        tol_override=args.tol,
        samples_override=args.samples,
        max_cells=args.max_cells,
    )
    if not rows:
        return _usage_error(f"unknown gallery id {args.only!r}")
    if args.csv:
        _emit_text(_gallery_csv(rows), args)
    elif args.json:
        _emit([{k: v for k, v in row.items() if k != "detail"} for row in rows], args)
    else:
        header = f"{'id':<4} {'lhs':>14} {'rhs':>14} {'expected':>14} {'verdict':<13} pass"
        print(header)
        print("-" * len(header))
        for row in rows:
            print(
                f"{row['id']:<4} {row['lhs']:>14.9f} {row['rhs']:>14.9f} "
                f"{row['expected']:>14.9f} {row['verdict']:<13} "
                f"{'yes' if row['pass'] else 'NO'}"
            )
        n_ok = sum(r["pass"] for r in rows)
        print(f"{n_ok}/{len(rows)} pass")
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# Argument parsing


def _add_common(p: argparse.ArgumentParser, tol_default: float | None = 1e-6) -> None:
    p.add_argument("--tol", type=float, default=tol_default, help="target tolerance")
    p.add_argument(
        "--samples",
        type=int,
        default=2,
        help="samples per cell (2 = cell edges; raise for oscillatory integrands)",
    )
    p.add_argument("--max-cells", type=int, default=CELL_CAP, help="uniform cell cap")
    p.add_argument("--json", action="store_true", help="emit JSON (default for most commands)")
    p.add_argument("--csv", action="store_true", help="emit CSV where the command supports it")
    p.add_argument("--out", type=str, default=None, help="write the report to PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadratura",
        description="Sampled Darboux quadrature and substitution-identity checks",
        epilog="QUADRATURA_THREADS caps internal parallelism (0 = serial).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("integrate", help="bracket the integral of f over [a, b]")
    p.add_argument("--f", required=True, help="integrand, e.g. 'x/(x^4+1)'")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("substitute", help="verify both sides of the substitution identity")
    p.add_argument("--f", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--phi-prime", default=None, help="override the symbolic derivative")
    p.add_argument("--grid-size", type=int, default=1000, help="hypothesis-check grid")
    _add_common(p)
    p.set_defaults(func=cmd_substitute)

    p = sub.add_parser("improper", help="verify the identity through truncation schedules")
    p.add_argument("--f", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--alpha", type=_endpoint, required=True, help="number, 'inf' or '-inf'")
    p.add_argument("--beta", type=_endpoint, required=True)
    p.add_argument("--open-alpha", action="store_true", help="approach alpha as an open endpoint")
    p.add_argument("--open-beta", action="store_true")
    p.add_argument("--steps", type=int, default=40, help="maximum truncation steps")
    p.add_argument("--offset", type=float, default=None, help="initial offset for finite open endpoints")
    p.add_argument("--cutoff-base", type=float, default=1.0, help="initial cutoff for infinite endpoints")
    p.add_argument("--inner-tol", type=float, default=None, help="per-truncation bracket tolerance")
    p.add_argument("--lhs-inner-tol", type=float, default=None)
    p.add_argument("--lhs-offset", type=float, default=None)
    p.add_argument("--lhs-cutoff-base", type=float, default=1.0)
    p.add_argument("--lhs-steps", type=int, default=None)
    p.add_argument("--lhs-tol", type=float, default=None)
    _add_common(p, tol_default=1e-6)
    p.set_defaults(func=cmd_improper)

    p = sub.add_parser("approx", help="build the piecewise-linear below-approximant")
    p.add_argument("--f", required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--n", type=int, required=True, help="refinement level")
    _add_common(p)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("diff", help="print the symbolic derivative")
    p.add_argument("--f", required=True)
    p.add_argument("--var", default=None, help="variable name (inferred when omitted)")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("gallery", help="run the built-in examples end to end")
    p.add_argument("--only", default=None, help="run a single entry (E1, E2 or E3)")
    p.add_argument("--tol", type=float, default=None, help="override every entry's tolerance")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--max-cells", type=int, default=CELL_CAP)
    p.add_argument("--json", action="store_true")
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_gallery)

    return parser


def _endpoint(text: str) -> float:
    v = float(text)
    return v


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

import csv
import io
import math

import numpy as np
import pytest

from quadratura import darboux
from quadratura.approximant import (
    NegativityError,
    PiecewiseLinear,
    build_approximant,
    eval_pl,
    integrate_pl,
    l1_distance,
    write_csv,
)
from quadratura.darboux import SamplingConfig
from quadratura.expr import parse
from quadratura.partition import Interval, ResourceLimitError, uniform_partition

EDGES = SamplingConfig(samples_per_cell=2)
UNIT = Interval(0.0, 1.0)


def build(b, n):
    return build_approximant(b.fn, UNIT, n, EDGES, hints=b.hints)


class TestBuild:
    def test_constant_has_no_ramps(self):
        g = build_approximant(parse("1"), UNIT, 3, EDGES)
        assert np.all(g.values == 1.0)

    def test_identity_level3_matches_hand_construction(self):
        g = build_approximant(parse("x"), UNIT, 3, EDGES)
        eps = 1.0 / 24.0
        knots, vals = [0.0], [0.0]
        for k in range(1, 8):
            knots += [k / 8 - eps, k / 8, k / 8 + eps]
            vals += [(k - 1) / 8, (k - 1) / 8, k / 8]
        knots.append(1.0)
        vals.append(7.0 / 8.0)
        assert np.array_equal(g.knots, knots)
        assert np.array_equal(g.values, vals)

    def test_low_levels_are_zero(self):
        for n in (1, 2):
            g = build_approximant(parse("x"), UNIT, n, EDGES)
            assert np.array_equal(g.knots, [0.0, 1.0])
            assert np.array_equal(g.values, [0.0, 0.0])

    def test_negativity_rejected(self):
        with pytest.raises(NegativityError):
            build_approximant(parse("x-1/2"), UNIT, 4, EDGES)

    def test_resource_cap_propagates(self):
        with pytest.raises(ResourceLimitError):
            build_approximant(parse("x"), UNIT, 25, EDGES)

    def test_bad_level(self):
        with pytest.raises(ValueError):
            build_approximant(parse("x"), UNIT, 0, EDGES)

    def test_decreasing_ramps(self):
        # 1 - x has descending plateaus; ramps live in the left strips
        g = build_approximant(parse("1-x"), UNIT, 3, EDGES)
        eps = 1.0 / 24.0
        assert eval_pl(g, 0.0) == 7.0 / 8.0
        # plateau value on block 2 is inf over block 2 = 1 - 2/8
        assert eval_pl(g, 0.125 + eps) == 0.75
        # ramp occupies [k/8 - eps, k/8]
        mid_ramp = eval_pl(g, 0.125 - eps / 2)
        assert 0.75 < mid_ramp < 0.875


class TestEvalPl:
    def test_segment_midpoint(self):
        g = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 2.0]))
        assert eval_pl(g, 0.5) == 1.0

    def test_knot_exactness(self):
        g = PiecewiseLinear(np.array([0.0, 0.3, 1.0]), np.array([1.0, 0.25, 0.75]))
        for x, v in zip(g.knots, g.values):
            assert eval_pl(g, float(x)) == v

    def test_out_of_range(self):
        g = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 2.0]))
        with pytest.raises(ValueError):
            eval_pl(g, 1.5)
        with pytest.raises(ValueError):
            eval_pl(g, -0.01)

    def test_vectorized(self):
        g = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 2.0]))
        xs = np.linspace(0.0, 1.0, 11)
        assert np.allclose(eval_pl(g, xs), 2.0 * xs)

    def test_clamped_within_segment(self):
        g = PiecewiseLinear(np.array([0.0, 1e-9, 1.0]), np.array([0.3, 0.7, 0.7]))
        xs = np.linspace(0.0, 1.0, 1001)
        ys = eval_pl(g, xs)
        assert ys.min() >= 0.3 and ys.max() <= 0.7


class TestIntegratePl:
    def test_unit_area(self):
        g = PiecewiseLinear(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
        assert integrate_pl(g, 0.0, 1.0) == 1.0

    def test_triangle(self):
        g = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 2.0]))
        assert integrate_pl(g, 0.0, 1.0) == 1.0

    def test_partial_range_splits_segments(self):
        g = PiecewiseLinear(np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0, 0.0]))
        assert abs(integrate_pl(g, 0.25, 0.75) - 0.375) < 1e-15

    def test_range_check(self):
        g = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 2.0]))
        with pytest.raises(ValueError):
            integrate_pl(g, -0.5, 0.5)

    def test_identity_level6_deficit(self):
        g = build_approximant(parse("x"), UNIT, 6, EDGES)
        v = integrate_pl(g, 0.0, 1.0)
        assert v <= 0.5
        assert 0.5 - v <= 1.0 / 6.0  # sup bound with M = 1

    def test_against_darboux_oracle(self):
        g = build_approximant(parse("x"), UNIT, 6, EDGES)
        exact = integrate_pl(g, 0.0, 1.0)
        est = darboux.integrate(lambda xs: eval_pl(g, xs), UNIT, 1e-6, EDGES)
        assert est.lower - 1e-12 <= exact <= est.upper + 1e-12

    def test_empty_range(self):
        g = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 2.0]))
        assert integrate_pl(g, 0.3, 0.3) == 0.0


class TestL1Distance:
    def test_constant_is_exact_at_level3(self):
        f = parse("1")
        g = build_approximant(f, UNIT, 3, EDGES)
        assert l1_distance(f, g, UNIT, 1e-9, EDGES) < 1e-9

    def test_identity_shrinks_with_level(self):
        f = parse("x")
        g4 = build_approximant(f, UNIT, 4, EDGES)
        g12 = build_approximant(f, UNIT, 12, EDGES)
        l4 = l1_distance(f, g4, UNIT, 1e-5, EDGES)
        l12 = l1_distance(f, g12, UNIT, 1e-5, EDGES)
        assert l4 > 0 and l12 > 0
        assert l12 < l4

    def test_zero_approximant_gives_full_mass(self):
        f = parse("x^2")
        g = build_approximant(f, UNIT, 1, EDGES)
        got = l1_distance(f, g, UNIT, 1e-6, EDGES)
        assert abs(got - 1.0 / 3.0) < 1e-6


class TestBelowApproximantProperties:
    def test_below_property_exact_hints(self, battery):
        xs = np.linspace(0.0, 1.0, 10_000)
        for b in battery:
            fv = darboux.as_evaluator(b.fn)(xs)
            for n in (3, 5, 8):
                g = build(b, n)
                gv = eval_pl(g, xs)
                assert np.all(gv >= 0.0)
                assert np.all(gv <= fv), f"{b.name} level {n}"

    def test_plateau_bound(self, battery):
        from quadratura.partition import block_grid

        n = 5
        for b in battery:
            g = build(b, n)
            grid = block_grid(UNIT, n)
            for k in range(1, grid.block_count + 1):
                blk = grid.block(k)
                m_k = darboux.infimum_on(b.fn, blk, EDGES, hints=b.hints)
                xs = np.linspace(blk.a, blk.b, 9)
                assert np.all(eval_pl(g, xs) <= m_k + 1e-12)

    def test_ramp_bound(self):
        from quadratura.partition import block_grid

        f = parse("x^2")
        n = 4
        g = build_approximant(f, UNIT, n, EDGES)
        grid = block_grid(UNIT, n)
        m = [darboux.infimum_on(f, grid.block(k), EDGES) for k in range(1, 17)]
        for k in range(1, 16):
            left = grid.sub_boundaries(k)
            right = grid.sub_boundaries(k + 1)
            xs = np.linspace(left[3], right[1], 17)
            ys = eval_pl(g, xs)
            lo, hi = min(m[k - 1], m[k]), max(m[k - 1], m[k])
            assert np.all(ys >= lo - 1e-15) and np.all(ys <= hi + 1e-15)

    def test_pointwise_convergence_for_continuous(self, battery):
        probes = np.linspace(0.0, 1.0, 100)
        for b in battery:
            if not b.continuous:
                continue
            g = build(b, 12)
            fv = darboux.as_evaluator(b.fn)(probes)
            gap = np.abs(eval_pl(g, probes) - fv).max()
            assert gap < 0.02, b.name

    def test_key_deficit_inequality(self, battery):
        for b in battery:
            for n in range(3, 13):
                g = build(b, n)
                p = uniform_partition(UNIT, 2**n)
                s = darboux.lower_sum(b.fn, p, EDGES, hints=b.hints)
                integral = integrate_pl(g, 0.0, 1.0)
                deficit = s - integral
                assert deficit >= -1e-12, (b.name, n)
                assert deficit <= b.sup_01 * 1.0 / n + 1e-12, (b.name, n)


class TestSerialization:
    def test_csv_round_trip(self, tmp_path):
        g = build_approximant(parse("x"), UNIT, 3, EDGES)
        path = tmp_path / "approx.csv"
        write_csv(g, str(path))
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["knot", "value"]
        knots = np.array([float(r[0]) for r in rows[1:]])
        vals = np.array([float(r[1]) for r in rows[1:]])
        assert np.array_equal(knots, g.knots)
        assert np.array_equal(vals, g.values)

    def test_csv_uses_dots(self):
        g = PiecewiseLinear(np.array([0.0, 0.5]), np.array([0.25, 1.5]))
        buf = io.StringIO()
        write_csv(g, buf)
        text = buf.getvalue()
        assert "0.25" in text and "," in text
        assert ";" not in text


class TestPiecewiseLinearType:
    def test_validation(self):
        with pytest.raises(ValueError):
            PiecewiseLinear(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
        with pytest.raises(ValueError):
            PiecewiseLinear(np.array([0.0, 1.0]), np.array([1.0, -0.5]))
        with pytest.raises(ValueError):
            PiecewiseLinear(np.array([0.0, 1.0]), np.array([1.0]))

    def test_callable(self):
        g = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 2.0]))
        assert g(0.25) == 0.5

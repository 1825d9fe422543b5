import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frozen_er.errors import DomainError
from frozen_er.fluid_limit import (
    d_p,
    e_p,
    f_p,
    f_p_prime,
    gel_curve,
    gumbel_shift,
    integral_identity_check,
    largest_tree_constant,
    ode_residuals,
    r_p,
    slowdown_constant,
    t_pk,
    tail_constant,
    threshold_time,
    v_p,
)
from frozen_er.special_functions import BorelParams, borel_pmf

PS = (0.3, 0.5, 1.0)
G1_AT_ONE = 0.79681213002002004616  # root of g = 1 - exp(-2g), mpmath
F_HALF_AT_HALF = 0.77258872223978123767  # -(ln(1/2) + 1/2) / (1/2)^2
TIME_GRID = np.linspace(0.0, 6.0, 1001)


def fixed_point_g1():
    g = 0.5
    for _ in range(5000):
        g = 1 - math.exp(-2 * g)
    return g


class TestSeries:
    @pytest.mark.parametrize("p", [0.1, 0.5, 1.0])
    def test_at_zero(self, p):
        assert f_p(p, 0.0) == 0.5

    def test_p_one_closed_form(self):
        assert abs(f_p(1.0, 0.5) - math.log(2)) <= 1e-12

    def test_p_half_closed_form(self):
        direct = 0.5 * sum(0.5 ** n / (1 + 0.5 * n) for n in range(200))
        assert abs(direct - F_HALF_AT_HALF) <= 1e-14
        assert abs(f_p(0.5, 0.5) - F_HALF_AT_HALF) <= 1e-12

    @given(st.floats(0.05, 1.0), st.floats(0.0, 0.999))
    @settings(max_examples=60, deadline=None)
    def test_against_direct_sum(self, p, s):
        n = np.arange(0, 40000)
        direct = 0.5 * float(np.sum(s ** n / (1 + p * n)))
        assert abs(f_p(p, s) - direct) <= 1e-10 * direct + 0.5 * s ** 40000 / (1 - s)

    @given(st.floats(0.05, 1.0), st.floats(0.01, 0.99))
    @settings(max_examples=40, deadline=None)
    def test_derivative(self, p, s):
        h = 1e-6
        num = (f_p(p, s + h) - f_p(p, s - h)) / (2 * h)
        assert abs(f_p_prime(p, s) - num) <= 1e-5 * max(1.0, num)

    def test_domain(self):
        with pytest.raises(DomainError):
            f_p(0.5, 1.0)


class TestGel:
    @pytest.mark.parametrize("p", PS)
    def test_null_before_half(self, p):
        assert gel_curve(p).g(0.3) == 0.0
        assert gel_curve(p).g(0.5) == 0.0

    def test_erdos_renyi_fixed_point(self):
        assert abs(fixed_point_g1() - G1_AT_ONE) <= 1e-14
        assert abs(gel_curve(1.0).g(1.0) - G1_AT_ONE) <= 1e-8

    @pytest.mark.parametrize("p", PS)
    def test_right_derivative_at_half(self, p):
        c = gel_curve(p)
        h = 1e-4
        assert abs((c.g(0.5 + h) - c.g(0.5)) / h / (2 * (1 + p)) - 1) <= 1e-2

    @given(st.floats(0.05, 1.0), st.floats(0.0, 0.999))
    @settings(max_examples=50, deadline=None)
    def test_inverts_series(self, p, s):
        assert abs(gel_curve(round(p, 3)).g(f_p(round(p, 3), s)) - s) <= 1e-8

    @pytest.mark.parametrize("p", PS)
    def test_monotone_and_concave(self, p):
        c = gel_curve(p)
        g = c.g(TIME_GRID)
        d = d_p(c, TIME_GRID)
        v = v_p(c, TIME_GRID)
        assert np.all(np.diff(g) >= 0) and np.all(np.diff(d) >= -1e-15) and np.all(np.diff(v) <= 0)
        after = TIME_GRID[TIME_GRID > 0.5]
        assert np.all(np.diff(c.g(after), 2) <= 1e-6)
        assert np.all(np.diff(d_p(c, TIME_GRID), 2) >= -1e-6)

    @pytest.mark.parametrize("p", PS)
    def test_ratio_and_edges_unimodal(self, p):
        c = gel_curve(p)
        up = TIME_GRID[(TIME_GRID > 0) & (TIME_GRID <= 0.5)]
        down = TIME_GRID[TIME_GRID >= 0.5]
        for fn in (r_p, e_p):
            assert np.all(np.diff(fn(c, up)) > 0)
            assert np.all(np.diff(fn(c, down)) < 0)
        others = TIME_GRID[np.abs(TIME_GRID - 0.5) > 1e-12]
        assert np.all(r_p(c, others) < 0.5)

    def test_ordering_in_p(self):
        gs = [gel_curve(p).g(TIME_GRID) for p in (0.1, 0.3, 0.5, 0.8, 1.0)]
        for lo, hi in zip(gs, gs[1:]):
            assert np.all(lo <= hi + 1e-12)

    @pytest.mark.parametrize("p", PS)
    def test_tail_constant(self, p):
        # 1 - g_p(t) ~ C_p exp(-2pt) with C_p = exp(-(psi(1/p) + gamma)), which is 1 only at p = 1
        c = gel_curve(p)
        t = 8 / p
        ratio = (1 - c.g(t)) * math.exp(2 * p * t)
        assert abs(ratio / tail_constant(p) - 1) <= 0.05
        if p == 1.0:
            assert abs(ratio - 1) <= 0.05

    def test_saturation(self):
        c = gel_curve(1.0)
        val, sat = c.invert(c.t_sat + 1)
        assert sat and val == 1 - c.gap


class TestDerivedFunctions:
    @pytest.mark.parametrize("p", PS)
    def test_values_before_half(self, p):
        c = gel_curve(p)
        assert r_p(c, 0.5) == 0.5
        assert d_p(c, 0.4) == 0.0 and e_p(c, 0.4) == 0.4

    def test_discard_asymptote(self):
        assert abs(d_p(gel_curve(1.0), 5.0) - 4.0) <= 2 * math.exp(-10) * 1.5

    @pytest.mark.parametrize("p", PS)
    def test_ratio_identity(self, p):
        c = gel_curve(p)
        assert np.max(np.abs(r_p(c, TIME_GRID) - TIME_GRID * (1 - c.g(TIME_GRID)))) <= 1e-9

    def test_tree_densities_at_zero(self):
        c = gel_curve(0.5)
        assert t_pk(c, 1, 0.0) == 1.0 and t_pk(c, 2, 0.0) == 0.0

    @pytest.mark.parametrize("p", PS)
    @pytest.mark.parametrize("t", [0.2, 0.7, 2.0])
    def test_tree_mass_and_borel_weights(self, p, t):
        c = gel_curve(p)
        u = 1 - c.g(t)
        mass, k = 0.0, 0
        while True:
            k += 1
            term = k * t_pk(c, k, t)
            mass += term
            if k > 10 and term < 1e-12 * mass:
                break
        assert abs(mass - u) <= 1e-6
        theta = 2 * t * u
        for k in range(1, 15):
            assert abs(k * t_pk(c, k, t) / u - borel_pmf(BorelParams(theta), k)) <= 1e-12

    def test_log_space_branch(self):
        c = gel_curve(1.0)
        k = 31
        w = k ** (k - 2) / math.factorial(k)
        t = 0.4
        direct = w * (2 * t) ** (k - 1) * math.exp(-2 * k * t)
        assert abs(t_pk(c, k, t) / direct - 1) <= 1e-10


class TestOde:
    @pytest.mark.parametrize("p,t", [(1.0, 1.0), (0.3, 3.0), (0.5, 0.6)])
    def test_residuals(self, p, t):
        assert max(ode_residuals(gel_curve(p), t)) <= 1e-5

    @pytest.mark.parametrize("p", PS)
    def test_residual_grid(self, p):
        res = ode_residuals(gel_curve(p), np.linspace(0.51, 5, 200))
        assert max(float(r.max()) for r in res) <= 1e-5

    def test_too_close_to_half(self):
        with pytest.raises(DomainError):
            ode_residuals(gel_curve(1.0), 0.5005)


class TestIntegralIdentity:
    def test_half(self):
        lhs, rhs = integral_identity_check(0.5)
        assert abs(rhs - 0.5) <= 1e-12 and abs(lhs - 0.5) <= 1e-5

    def test_quarter(self):
        # rhs = (1 + 1/2 + 1/3) / 2 since psi(4) + gamma = H_3
        lhs, rhs = integral_identity_check(0.25)
        assert abs(rhs - 11 / 12) <= 1e-12 and abs(lhs - rhs) <= 1e-5

    def test_near_one(self):
        assert integral_identity_check(1.0) == (0.0, pytest.approx(0.0, abs=1e-12))
        assert integral_identity_check(0.999)[1] < 1e-2

    @pytest.mark.parametrize("p", [0.25, 0.5, 0.75])
    def test_agreement(self, p):
        lhs, rhs = integral_identity_check(p)
        assert abs(lhs - rhs) <= 1e-5


class TestConstants:
    def test_threshold_k1(self):
        assert threshold_time(0.7, 1, 1000).value == pytest.approx(math.log(1000) / 0.7, rel=1e-15)

    def test_threshold_formula_and_order(self):
        n, p = 10 ** 5, 0.5
        vals = [threshold_time(p, k, n).value for k in range(1, 11)]
        k = 3
        a = math.log(n) / (k * p)
        assert vals[k - 1] == pytest.approx(a + (k - 1) / (k * p) * math.log(a), rel=1e-15)
        assert all(x > y for x, y in zip(vals, vals[1:]))

    def test_threshold_domain(self):
        with pytest.raises(DomainError):
            threshold_time(0.5, 1, 2)

    def test_gumbel_shift_erdos_renyi(self):
        shift, scale = gumbel_shift(1.0, 1)
        assert abs(shift) <= 1e-12 and scale == 0.5

    def test_slowdown_values(self):
        assert abs(slowdown_constant(1.0)) <= 1e-10
        assert abs(slowdown_constant(0.5) - 1.0) <= 1e-10

    @pytest.mark.parametrize("p", PS)
    def test_largest_tree_subcritical(self, p):
        assert largest_tree_constant(0.25, gel_curve(p)) == pytest.approx(5.177398899124180, rel=1e-12)

    def test_largest_tree_supercritical_through_gel(self):
        c = gel_curve(0.5)
        r = 1.5 * (1 - c.g(1.5))
        assert largest_tree_constant(1.5, c) == pytest.approx(1 / (2 * r - 1 - math.log(2 * r)), rel=1e-12)

    def test_largest_tree_critical(self):
        with pytest.raises(DomainError):
            largest_tree_constant(0.5, gel_curve(1.0))

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from spinquant.rates import (
    QuadratureError,
    ThetaGrid,
    broadened_delta,
    build_rate_table,
    constant_rate_table,
    differential_rate,
    dos_rho_bar,
    total_rate,
    transition_dos,
)

PI = math.pi
TAU_C = 40 * PI
angles = st.floats(0.0, PI)
taus = st.floats(0.01, 500.0)


class TestBroadenedDelta:
    def test_peak_value(self):
        assert broadened_delta(0.0, 10 * PI) == pytest.approx(5.0, rel=1e-15)

    @pytest.mark.parametrize("tau", [0.3, PI, 17.0, 100 * PI])
    def test_first_zero(self, tau):
        assert broadened_delta(2 * PI / tau, tau) == pytest.approx(0.0, abs=1e-12 * tau)

    def test_windowed_normalization_example(self):
        assert oracles.delta_integral(10 * PI, window=50.0) == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize("tau", [10 * PI, 100 * PI])
    def test_windowed_normalization(self, tau):
        assert oracles.delta_integral(tau, window=50.0) == pytest.approx(1.0, abs=1e-3)

    def test_windowed_normalization_short_time(self):
        # at tau = pi the window misses the 1/(pi tau eps^2) tails, about 2/(50 pi^2)
        tail = 2.0 / (50.0 * PI * PI)
        assert oracles.delta_integral(PI, window=50.0) == pytest.approx(1.0 - tail, abs=1e-5)

    @pytest.mark.parametrize("tau", [PI, 10 * PI, 100 * PI])
    def test_full_line_normalization(self, tau):
        assert oracles.delta_integral(tau) == pytest.approx(1.0, abs=1e-6)

    def test_kernel_matches_oracle_form(self):
        eps = np.linspace(-3, 3, 1001)
        got = broadened_delta(eps, 7.0)
        want = [oracles.kernel(e, 7.0) for e in eps]
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-15)

    def test_taylor_branch_continuous(self):
        tau = 10.0
        switch = 2e-6 / tau
        below = broadened_delta(switch * (1 - 1e-9), tau)
        above = broadened_delta(switch * (1 + 1e-9), tau)
        assert below == pytest.approx(above, rel=1e-12)

    @given(st.floats(-100, 100), taus)
    def test_even(self, eps, tau):
        assert broadened_delta(eps, tau) == broadened_delta(-eps, tau)

    @pytest.mark.parametrize("tau", [0.0, -1.0])
    def test_domain(self, tau):
        with pytest.raises(ValueError):
            broadened_delta(0.1, tau)


class TestDensityOfStates:
    def test_pole_peak(self):
        assert dos_rho_bar(0.0, 10 * PI) == pytest.approx(5.0, rel=1e-12)

    def test_equator_short_time(self):
        assert dos_rho_bar(PI / 2, PI) == pytest.approx(4 / PI ** 2, rel=1e-12)

    def test_equator_long_time_suppressed(self):
        assert dos_rho_bar(PI / 2, 100 * PI) < 1e-3

    @given(angles, taus)
    def test_mirror(self, theta, tau):
        assert dos_rho_bar(PI - theta, tau) == pytest.approx(dos_rho_bar(theta, tau), rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize("theta", [0.0, PI])
    def test_matches_transition_dos_on_poles(self, theta):
        for tau in (PI, 10 * PI):
            assert dos_rho_bar(theta, tau) == pytest.approx(transition_dos(theta, theta, tau), rel=1e-12)

    def test_overlap_weights_sum_to_one(self):
        th = np.linspace(0, PI, 101)
        np.testing.assert_allclose(np.cos(th / 2) ** 2 + np.sin(th / 2) ** 2, 1.0, atol=1e-15)

    def test_b_factor_inequality(self):
        th = np.linspace(0, PI, 100)
        a, b = np.meshgrid(th, th, indexing="ij")
        s = (np.cos(a / 2) * np.cos(b / 2)) ** 2 + (np.sin(a / 2) * np.sin(b / 2)) ** 2
        assert s.max() <= 1.0 + 1e-15
        near_one = np.argwhere(s > 1 - 1e-12)
        assert {tuple(x) for x in near_one} == {(0, 0), (99, 99)}


class TestTransitionDos:
    def test_pole_flip_forbidden(self):
        for tau in (0.1, PI, 10 * PI, 300.0):
            assert transition_dos(0.0, PI, tau) == pytest.approx(0.0, abs=1e-30)

    def test_pole_to_pole_same(self):
        assert transition_dos(0.0, 0.0, 10 * PI) == pytest.approx(5.0, rel=1e-12)

    @given(angles, angles, taus)
    def test_double_mirror(self, a, b, tau):
        x = transition_dos(a, b, tau)
        y = transition_dos(PI - a, PI - b, tau)
        assert x == pytest.approx(y, rel=1e-8, abs=1e-12)

    @given(angles, angles, taus)
    def test_nonnegative(self, a, b, tau):
        assert transition_dos(a, b, tau) >= 0.0


class TestDifferentialRate:
    def test_value(self):
        assert differential_rate(0.0, 0.0, 10 * PI, 40 * PI) == pytest.approx(5.0 / (40 * PI), rel=1e-12)

    def test_forbidden(self):
        assert differential_rate(0.0, PI, 10 * PI, 40 * PI) == pytest.approx(0.0, abs=1e-30)

    def test_scaling(self):
        a = differential_rate(0.7, 1.9, 33.0, 10.0)
        b = differential_rate(0.7, 1.9, 33.0, 20.0)
        assert b == pytest.approx(a / 2, rel=1e-15)

    def test_domain(self):
        with pytest.raises(ValueError):
            differential_rate(0.1, 0.2, 1.0, 0.0)


class TestTotalRate:
    @pytest.mark.parametrize("tau", [0.05, 1.0, 10 * PI, 200 * PI, 400 * PI])
    @pytest.mark.parametrize("theta", [0.0, PI / 4, PI / 2])
    def test_against_quadrature_oracle(self, theta, tau):
        assert total_rate(theta, tau, TAU_C) == pytest.approx(oracles.total_rate(theta, tau, TAU_C), rel=2e-4)

    @pytest.mark.parametrize("theta", [0.0, PI / 4, PI / 2])
    def test_long_time_limit(self, theta):
        # the delta peak sits on the end of the cos(theta') range, so only half of
        # its unit mass is collected: the limit is 2 pi / tau_c for every theta
        assert total_rate(theta, 200 * PI, TAU_C) == pytest.approx(2 * PI / TAU_C, rel=0.02)
        assert total_rate(theta, 4000 * PI, TAU_C, n_theta=8192) == pytest.approx(2 * PI / TAU_C, rel=2e-3)

    def test_short_time_linear(self):
        # d -> tau/(2 pi) for small tau, and the channel weights integrate to 1
        tau = 1e-3
        assert total_rate(1.1, tau, TAU_C) == pytest.approx(tau / TAU_C, rel=1e-5)

    @given(angles, st.floats(0.01, 600.0))
    @settings(max_examples=50, deadline=None)
    def test_mirror(self, theta, tau):
        a = total_rate(theta, tau, TAU_C)
        b = total_rate(PI - theta, tau, TAU_C)
        assert abs(a - b) <= 1e-9 * max(a, 1e-300)

    def test_resolution_check(self):
        with pytest.raises(QuadratureError):
            total_rate(0.3, 1e6, TAU_C, n_theta=256)

    def test_domain(self):
        with pytest.raises(ValueError):
            total_rate(0.3, 0.0, TAU_C)
        with pytest.raises(ValueError):
            total_rate(4.0, 1.0, TAU_C)


class TestRateTable:
    def test_shapes_and_defaults(self, table40):
        assert table40.theta_grid.size == 2048
        assert table40.tau_grid.size == 4096
        assert table40.tau_max == pytest.approx(4 * TAU_C)
        assert table40.total_rate.shape == (2048, 4096)
        assert table40.cumulative_rate.shape == (2048, 4096)

    def test_invariants(self, table40):
        assert np.all(table40.total_rate >= 0)
        cum = table40.cumulative_rate
        assert np.all(cum[:, 0] == 0.0)
        assert np.all(np.diff(cum, axis=1) >= 0)
        np.testing.assert_allclose(table40.total_rate, table40.total_rate[::-1], rtol=1e-9, atol=0)

    def test_rows_match_total_rate(self, table40):
        for theta in (0.0, 1.0, PI / 2):
            for j in (7, 100, 2000, 4095):
                tau = table40.tau_grid[j]
                assert table40.rate(theta)[j] == pytest.approx(total_rate(theta, tau, TAU_C), rel=1e-12)

    @pytest.mark.parametrize("j", [1, 10, 100, 1000, 2047, 4095])
    def test_cumulative_against_cin_oracle(self, table40, j):
        tau = table40.tau_grid[j]
        want = oracles.cumulative_rate(tau, TAU_C)
        assert table40.cumulative(0.0)[j] == pytest.approx(want, rel=2e-4)

    def test_tail_slope(self, table40):
        cum = table40.cumulative(0.0)
        tg = table40.tau_grid
        k = np.searchsorted(tg, 150 * PI)
        slope = (cum[-1] - cum[k]) / (tg[-1] - tg[k])
        assert slope == pytest.approx(2 * PI / TAU_C, rel=0.02)

    def test_grid_convergence(self, table40):
        fine = build_rate_table(TAU_C, n_theta=4096)
        a = table40.rate_plus[1:]
        b = fine.rate_plus[1:]
        assert np.max(np.abs(a - b) / b) < 1e-3

    def test_constant_override(self):
        t = constant_rate_table(0.25, 100.0, n_tau=11)
        np.testing.assert_allclose(t.cumulative(0.4), 0.25 * t.tau_grid)
        np.testing.assert_allclose(t.rate(2.0), 0.25)

    def test_resolution_failure(self):
        with pytest.raises(QuadratureError):
            build_rate_table(1e5, n_theta=128, n_tau=16)

    def test_theta_out_of_range(self, small_table):
        with pytest.raises(ValueError):
            small_table.cumulative(-0.1)

    def test_csv_dump(self, small_table, tmp_path):
        p = tmp_path / "table.csv"
        small_table.write_csv(p, theta_stride=128, tau_stride=256)
        with open(p, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["theta", "tau", "total_rate", "cumulative_rate"]
        assert len(rows) == 1 + 4 * 4
        th, tau, r, c = map(float, rows[6])
        assert r == pytest.approx(small_table.rate(th, tau), rel=1e-12)
        assert p.read_bytes().count(b"\r") == 0


def test_theta_grid_mirror():
    g = ThetaGrid.uniform(257)
    np.testing.assert_array_equal(g.cos2, g.sin2[::-1])
    np.testing.assert_array_equal(g.sin, g.sin[::-1])
    np.testing.assert_allclose(g.cos2, np.cos(g.theta / 2) ** 2, atol=1e-15)
    p, m = g.channel_integrals(50.0)
    assert p == m

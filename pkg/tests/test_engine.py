import math

import numpy as np
import pytest
from scipy import stats

import oracles
from spinquant import _backend
from spinquant.engine import (
    NO_SCATTER,
    PathBatch,
    PathConfig,
    direction_at,
    sample_final_direction,
    sample_flight_time,
    sample_initial,
    simulate_ensemble,
    simulate_path,
)
from spinquant.rates import build_rate_table, constant_rate_table
from spinquant.rng import RngStream
from spinquant.spin import SpinDirection

PI = math.pi
TAU_C = 40 * PI
BACKENDS = _backend.available()


def _thetas_prime(theta_from, tau_f, table, n, seed):
    """n draws of theta' through the default backend's batched kernel."""
    u = np.random.default_rng(seed).random(n)
    u[u == 0] = 0.5
    return _backend.sample_theta_prime_batch(
        _backend.default_backend(), np.full(n, theta_from), np.full(n, tau_f), table, u
    )


class TestInitial:
    def test_uniform_theta(self):
        n = 100_000
        th = simulate_ensemble(n, constant_rate_table(1e-9, 1.0, n_tau=4), 1.0, 11).theta0
        assert np.all((th >= 0) & (th <= PI))
        counts, _ = np.histogram(th, bins=20, range=(0, PI))
        assert np.all(np.abs(counts - n / 20) < 4 * np.sqrt(n / 20))
        assert abs(th.mean() - PI / 2) < 3 * (PI / math.sqrt(12)) / math.sqrt(n)

    def test_reference_draws(self):
        rng = RngStream(5, 1)
        d = sample_initial(rng)
        assert d.tau_since_scatter == 0.0
        assert 0 <= d.theta <= PI and 0 <= d.phi < 2 * PI
        assert rng.draw_counter == 2


class TestFlightTime:
    def test_constant_rate_closed_form(self):
        w0 = 0.3
        table = constant_rate_table(w0, 400.0, n_tau=64)
        for k in range(200):
            a = RngStream(8, k)
            b = RngStream(8, k)
            tf = sample_flight_time(SpinDirection(1.0), table, a)
            r = b.uniform()
            expected = -math.log(r) / w0
            if expected > 400.0:
                assert tf == NO_SCATTER
            else:
                assert tf == pytest.approx(expected, rel=1e-12)

    def test_sentinel(self):
        table = constant_rate_table(1e-6, 1.0, n_tau=8)
        assert sample_flight_time(SpinDirection(0.5), table, RngStream(0, 0)) == NO_SCATTER

    def test_monotone_in_r(self, table40):
        cum = table40.cumulative(0.9)
        targets = np.linspace(1e-6, cum[-1] * 0.999, 300)

        class Fixed:
            def __init__(self, r):
                self.r = r

            def uniform(self):
                return self.r

        taus = [sample_flight_time(SpinDirection(0.9), table40, Fixed(math.exp(-t))) for t in targets]
        assert np.all(np.diff(taus) >= 0)


class TestFinalDirection:
    def test_pole_stays_in_hemisphere(self, table40):
        th = _thetas_prime(0.0, 100 * PI, table40, 20_000, 1)
        assert np.mean(th < PI / 2) > 0.99

    def test_phi_uniform(self, small_table):
        phis = []
        for k in range(20_000):
            d = sample_final_direction(SpinDirection(1.2), 3.0, small_table, RngStream(3, k))
            phis.append(d.phi)
            assert d.tau_since_scatter == 0.0
        counts, _ = np.histogram(phis, bins=20, range=(0, 2 * PI))
        assert stats.chisquare(counts).pvalue > 0.05

    @pytest.mark.parametrize("theta_from", [0.4, PI / 2, 2.5])
    def test_short_time_matches_oracle(self, table40, theta_from):
        tau = 0.1
        th = _thetas_prime(theta_from, tau, table40, 50_000, 2)
        edges = np.linspace(0, PI, 31)
        p = oracles.bin_probabilities(theta_from, tau, edges)
        counts, _ = np.histogram(th, bins=edges)
        assert stats.chisquare(counts, p * counts.sum()).pvalue > 0.05

    def test_short_time_is_broad(self, table40):
        th = _thetas_prime(0.3, 0.1, table40, 50_000, 3)
        counts, _ = np.histogram(th, bins=10, range=(0, PI))
        # sin(theta')-weighted and broad: no polar peaks
        assert counts[4] > counts[0] and counts[5] > counts[9]

    def test_mirror(self, table40):
        a = _thetas_prime(0.7, 60.0, table40, 50_000, 4)
        b = _thetas_prime(PI - 0.7, 60.0, table40, 50_000, 5)
        assert stats.ks_2samp(a, PI - b).pvalue > 0.01

    def test_reference_matches_kernel(self, table40):
        rng = RngStream(77, 0)
        d = sample_final_direction(SpinDirection(1.0), 25.0, table40, rng)
        u = RngStream(77, 0).uniform()
        for name in BACKENDS:
            got = _backend.sample_theta_prime_batch(name, [1.0], [25.0], table40, [u])[0]
            assert got == pytest.approx(d.theta, abs=1e-12)

    def test_bad_tau(self, small_table):
        with pytest.raises(ValueError):
            sample_final_direction(SpinDirection(1.0), 0.0, small_table, RngStream(0, 0))


class TestSimulatePath:
    def test_no_scattering_limit(self):
        table = build_rate_table(1e12, n_theta=256, n_tau=64, tau_max=100.0)
        p = simulate_path(PathConfig(100.0), table, RngStream(1, 0))
        assert p.events == ()
        assert direction_at(p, 100.0).theta == p.initial.theta

    def test_event_invariants(self, table40):
        for k in range(20):
            p = simulate_path(PathConfig(2 * TAU_C), table40, RngStream(1234, k))
            times = [e.tau_lab for e in p.events]
            assert all(b > a for a, b in zip(times, times[1:]))
            assert all(e.dir_after.tau_since_scatter == 0 for e in p.events)
            assert all(0 < t <= p.tau_end for t in times)

    def test_reaches_poles(self, table40):
        # after several scatterings most paths have visited theta < 0.2 or > pi - 0.2,
        # and most end up within pi/4 of a pole whatever their start
        batch = simulate_ensemble(2000, table40, 2 * TAU_C, 1234)
        idx = np.repeat(np.arange(len(batch)), batch.event_counts)
        th = batch.ev_theta_after
        near = np.zeros(len(batch), bool)
        np.logical_or.at(near, idx, (th < 0.2) | (th > PI - 0.2))
        several = batch.event_counts >= 5
        assert several.mean() > 0.8
        assert near[several].mean() > 0.5
        final, _, _ = batch.directions_at(2 * TAU_C)
        polar = (final < PI / 4) | (final > 3 * PI / 4)
        assert polar.mean() > 0.7
        start_polar = (batch.theta0 < PI / 4) | (batch.theta0 > 3 * PI / 4)
        assert polar[~start_polar].mean() > 0.7

    def test_deterministic(self, table40):
        a = simulate_path(PathConfig(2 * TAU_C), table40, RngStream(99, 5))
        b = simulate_path(PathConfig(2 * TAU_C), table40, RngStream(99, 5))
        assert a == b

    def test_fixed_initial(self, table40):
        d0 = SpinDirection(0.0, 1.0)
        p = simulate_path(PathConfig(TAU_C, d0), table40, RngStream(1, 1))
        assert p.initial == d0


class TestDirectionAt:
    @pytest.fixture(scope="class")
    @classmethod
    def path(cls, table40):
        for k in range(100):
            p = simulate_path(PathConfig(2 * TAU_C), table40, RngStream(7, k))
            if len(p.events) >= 3:
                return p

    def test_start(self, path):
        assert direction_at(path, 0.0) == path.initial

    def test_right_continuous(self, path):
        ev = path.events[1]
        d = direction_at(path, ev.tau_lab)
        assert d.theta == ev.dir_after.theta
        assert d.phi == ev.dir_after.phi
        assert d.tau_since_scatter == 0.0

    def test_theta_constant_between_events(self, path):
        a, b = path.events[0].tau_lab, path.events[1].tau_lab
        ts = np.linspace(a, b, 12)[:-1]
        assert {direction_at(path, t).theta for t in ts} == {path.events[0].dir_after.theta}
        left = direction_at(path, b - 1e-9)
        assert left.theta == path.events[1].dir_before.theta

    def test_phi_precesses(self, path):
        e = path.events[0]
        d = direction_at(path, e.tau_lab + 1.0)
        assert d.phi == pytest.approx(math.fmod(e.dir_after.phi + 1.0, 2 * PI))

    def test_out_of_range(self, path):
        with pytest.raises(ValueError):
            direction_at(path, -1.0)
        with pytest.raises(ValueError):
            direction_at(path, path.tau_end + 1.0)


class TestEnsemble:
    def test_batch_matches_reference_paths(self, small_table):
        tau_end = 2 * TAU_C
        ref = [simulate_path(PathConfig(tau_end), small_table, RngStream(31, k)) for k in range(40)]
        for name in BACKENDS:
            batch = simulate_ensemble(40, small_table, tau_end, 31, backend=name, chunk_size=7)
            for k, p in enumerate(ref):
                q = batch.path(k)
                assert q.path_index == k
                assert len(q.events) == len(p.events)
                for e, f in zip(p.events, q.events):
                    assert f.tau_lab == pytest.approx(e.tau_lab, rel=1e-12)
                    assert f.dir_after.theta == pytest.approx(e.dir_after.theta, abs=1e-9)

    def test_threads_do_not_change_results(self, small_table):
        a = simulate_ensemble(300, small_table, 2 * TAU_C, 5, threads=1, chunk_size=16)
        b = simulate_ensemble(300, small_table, 2 * TAU_C, 5, threads=4, chunk_size=16)
        for name in ("offsets", "theta0", "phi0", "ev_tau", "ev_theta_after", "ev_phi_after"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_directions_at_matches_scalar(self, small_table):
        batch = simulate_ensemble(50, small_table, 2 * TAU_C, 8)
        for t in (0.0, 30.0, batch.ev_tau[3], 2 * TAU_C):
            th, ph, since = batch.directions_at(float(t))
            for i in range(len(batch)):
                d = direction_at(batch.path(i), float(t))
                assert th[i] == d.theta
                assert ph[i] == pytest.approx(d.phi, abs=1e-12)
                assert since[i] == pytest.approx(d.tau_since_scatter, abs=1e-9)

    def test_from_paths_roundtrip(self, small_table):
        batch = simulate_ensemble(20, small_table, TAU_C, 3)
        again = PathBatch.from_paths(list(batch), tau_end=TAU_C)
        np.testing.assert_array_equal(again.ev_tau, batch.ev_tau)
        np.testing.assert_array_equal(again.offsets, batch.offsets)

    def test_pole_memory(self, table40):
        # paths started at theta = 0 stay mostly in the upper hemisphere early on and
        # lose that memory gradually
        batch = simulate_ensemble(4000, table40, 2 * TAU_C, 17, initial=SpinDirection(0.0, 0.0))
        upper = [np.mean(batch.directions_at(t * TAU_C)[0] < PI / 2) for t in (0.2, 0.6, 1.0, 2.0)]
        assert upper[0] > 0.9
        assert all(b <= a + 0.02 for a, b in zip(upper, upper[1:]))
        assert upper[-1] > 0.5
        first = batch.ev_theta_after[batch.offsets[:-1][batch.event_counts > 0]]
        assert np.mean(first >= PI / 2) < 0.1

    def test_invalid_arguments(self, small_table):
        with pytest.raises(ValueError):
            simulate_ensemble(0, small_table, 1.0, 1)
        with pytest.raises(ValueError):
            simulate_ensemble(5, small_table, 1.0, 1, threads=0)
        with pytest.raises(ValueError):
            simulate_ensemble(5, small_table, 1.0, 1, backend="fortran")

"""Tests for the multi-anticipative car-following model."""

import numpy as np
import pytest

from tropnet.carfollow import (
    AnticipationConfig,
    BehaviorLaw,
    OpenScenario,
    RingScenario,
    benchmark_leader_profile,
    build_dynamics,
    reverse_speed_law,
    saturating_law,
    simulate_open,
    speed_law,
    stationary_open,
    stationary_ring,
    transient_metrics,
    uniform_positions,
)
from tropnet.dpsolve import check_structure, growth_rate, iterate
from tropnet.errors import RangeError, StabilityError


def random_stable_law(rng, n_u=None, n_w=None):
    n_u = n_u or int(rng.integers(1, 4))
    n_w = n_w or int(rng.integers(1, 3))
    alpha = rng.uniform(0.05, 1.0, (n_u, n_w))
    beta = rng.uniform(0.0, 10.0, (n_u, n_w))
    return BehaviorLaw(alpha=alpha, beta=beta)


class TestSpeedLaw:
    def test_single_piece_affine(self):
        law = BehaviorLaw(alpha=[[0.5]], beta=[[2.0]])
        assert speed_law(10.0, law) == pytest.approx(7.0)

    def test_saturating_two_piece(self):
        law = saturating_law(a=0.5, v_max=10.0)
        assert speed_law(4.0, law) == pytest.approx(2.0)
        assert speed_law(100.0, law) == pytest.approx(10.0)

    def test_envelope_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            law = random_stable_law(rng)
            y = float(rng.uniform(0, 50))
            vals = law.alpha * y + law.beta
            got = speed_law(y, law)
            assert vals.min() - 1e-12 <= got <= vals.max() + 1e-12

    def test_unstable_slope_rejected(self):
        with pytest.raises(StabilityError):
            BehaviorLaw(alpha=[[1.5]], beta=[[0.0]])


class TestBuildDynamics:
    def test_single_leader_matches_plain_model(self):
        rng = np.random.default_rng(1)
        law = random_stable_law(rng)
        ring = RingScenario(cars=5, mean_gap=12.0)
        d1 = build_dynamics(ring, AnticipationConfig(1, 0.0), law)
        x0 = rng.uniform(0, 60, 5)
        # direct simulation of the non-anticipative recursion
        x = np.sort(x0)[::-1].copy()
        traj = iterate(d1, x, 30).states
        ref = x.copy()
        length = ring.road_length
        for _ in range(30):
            nxt = np.empty(5)
            for n in range(5):
                lead = (n - 1) % 5
                gap = ref[lead] - ref[n] + (length if n == 0 else 0.0)
                nxt[n] = ref[n] + speed_law(gap, law)
            ref = nxt
        assert np.allclose(traj[30], ref, atol=1e-9)

    def test_ring_support_circulant(self):
        law = saturating_law(0.4, 8.0)
        d = build_dynamics(RingScenario(3, 10.0), AnticipationConfig(2, 0.1), law)
        # branch j=2 pieces reference the second leader (offset 2)
        z = 1 * law.n_u  # first piece of j=2
        m = d.m_mats[z, 0]
        assert m[0, 1] > 0 and m[1, 2] > 0 and m[2, 0] > 0

    def test_open_leader_row_is_unit(self):
        law = saturating_law(0.4, 8.0)
        d = build_dynamics(OpenScenario(4, 6.0), AnticipationConfig(2, 0.0), law)
        for z in range(d.m_mats.shape[0]):
            for w in range(d.m_mats.shape[1]):
                assert d.m_mats[z, w, 0, 0] == 1.0
                assert np.all(d.m_mats[z, w, 0, 1:] == 0.0)

    def test_substochastic(self):
        rng = np.random.default_rng(3)
        law = random_stable_law(rng)
        d = build_dynamics(RingScenario(6, 9.0), AnticipationConfig(3, 0.2), law)
        rep = check_structure(d)
        assert rep["substochastic"]

    def test_stability_guard(self):
        law = BehaviorLaw(alpha=[[1.0]], beta=[[0.0]])
        with pytest.raises(StabilityError):
            build_dynamics(RingScenario(4, 5.0), AnticipationConfig(3, 1.5), law)


class TestStationaryRing:
    def test_free_flow_plateau(self):
        law = saturating_law(0.5, 10.0)
        res = stationary_ring(RingScenario(5, 100.0), AnticipationConfig(1, 0.0), law)
        assert res["v_bar"] == pytest.approx(10.0)

    def test_residuals_random_laws(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            law = random_stable_law(rng)
            cars = int(rng.integers(2, 8))
            gap = float(rng.uniform(2.0, 40.0))
            m = int(rng.integers(1, min(4, cars) + 1))
            lam = float(rng.uniform(0.0, 0.3))
            try:
                res = stationary_ring(
                    RingScenario(cars, gap), AnticipationConfig(m, lam), law
                )
            except StabilityError:
                continue
            assert res["residual"] <= 1e-9

    def test_speed_independent_of_anticipation(self):
        rng = np.random.default_rng(9)
        law = random_stable_law(rng)
        ring = RingScenario(8, 15.0)
        speeds = [
            stationary_ring(ring, AnticipationConfig(m, 0.1), law)["v_bar"]
            for m in (1, 3, 5)
        ]
        assert max(speeds) - min(speeds) <= 1e-12


class TestStationaryOpen:
    def test_affine_inversion(self):
        law = BehaviorLaw(alpha=[[0.5]], beta=[[1.0]])
        assert reverse_speed_law(4.0, law) == pytest.approx(6.0)

    def test_residuals_random_laws(self):
        rng = np.random.default_rng(11)
        checked = 0
        while checked < 50:
            law = random_stable_law(rng)
            m = int(rng.integers(1, 4))
            v_target = float(rng.uniform(0.5, 5.0))
            try:
                res = stationary_open(v_target, AnticipationConfig(m, 0.1), law)
            except (RangeError, StabilityError):
                continue
            assert res["residual"] <= 1e-9
            checked += 1

    def test_unreachable_speed(self):
        law = saturating_law(0.5, 10.0)
        with pytest.raises(RangeError):
            reverse_speed_law(12.0, law)


class TestAsymptoticSpeedAcrossAnticipation:
    def test_ring_growth_equal_across_m(self):
        law = saturating_law(0.5, 10.0, y_min=2.0)
        ring = RingScenario(10, 12.0)
        rng = np.random.default_rng(13)
        x0 = uniform_positions(10, 12.0) + rng.uniform(-2, 2, 10)
        rates = []
        for m in (1, 5, 10):
            d = build_dynamics(ring, AnticipationConfig(min(m, 9), 0.05), law)
            traj = iterate(d, x0, 400)
            mu, _ = growth_rate(traj)
            rates.append(mu)
        assert max(rates) - min(rates) <= 1e-6


class TestTransient:
    def test_constant_speed_zero_variance(self):
        law = saturating_law(0.5, 10.0)
        scenario = OpenScenario(6, 4.0)
        x0 = uniform_positions(6, reverse_speed_law(4.0, law))
        traj = simulate_open(scenario, AnticipationConfig(1, 0.0), law, x0,
                             np.full(100, 4.0))
        met = transient_metrics(traj)
        assert met["speed_variance"] == pytest.approx(0.0, abs=1e-18)
        assert met["accel_variance"] == pytest.approx(0.0, abs=1e-18)

    def test_anticipation_smooths_benchmark(self):
        # 10 km road, 500 s at half-second steps, perturbed leader
        law = saturating_law(0.6, 15.0, y_min=7.0)
        profile = benchmark_leader_profile()
        nu = 40
        x0 = uniform_positions(nu, 25.0) + 9000.0
        met = {}
        for m in (1, 5):
            traj = simulate_open(
                OpenScenario(nu, 12.0), AnticipationConfig(m, 0.0), law, x0, profile
            )
            met[m] = transient_metrics(traj)
            # order preservation: no passing
            gaps = np.diff(traj.states, axis=1)
            assert np.all(gaps <= 1e-9)
        assert met[5]["speed_variance"] < met[1]["speed_variance"]

    def test_ring_collision_freedom(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            law = random_stable_law(rng)
            cars = int(rng.integers(3, 8))
            gap = float(rng.uniform(5.0, 20.0))
            ring = RingScenario(cars, gap)
            try:
                d = build_dynamics(ring, AnticipationConfig(int(rng.integers(1, 3)), 0.1), law)
            except StabilityError:
                continue
            x0 = uniform_positions(cars, gap) + rng.uniform(0, 0.4 * gap, cars)
            x0 = np.sort(x0)[::-1]
            traj = iterate(d, x0, 120)
            for t in range(traj.states.shape[0]):
                x = traj.states[t]
                ring_gaps = np.empty(cars)
                ring_gaps[1:] = x[:-1] - x[1:]
                ring_gaps[0] = x[-1] + ring.road_length - x[0]
                assert np.all(ring_gaps >= -1e-9)

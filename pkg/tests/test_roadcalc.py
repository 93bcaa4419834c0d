"""Tests for the road network calculus."""

import numpy as np
import pytest

from tropnet.curves import Curve
from tropnet.errors import CausalityError, ConfigError, GeometryError
from tropnet.roadcalc import (
    RoadSectionParams,
    TrafficLightParams,
    cell_transmission_simulate,
    concatenate,
    controlled_section_service,
    default_horizon,
    feedback,
    itinerary_delay,
    itinerary_service_matrix,
    rate_latency_extraction,
    ring_simulate,
    section_service_matrix,
)

EX32 = dict(length_m=200.0, free_speed=28.0, wave_speed=7.0, capacity=0.5,
            n_max=20.0, n0=10.0)


def example_section(**over):
    kw = dict(EX32)
    kw.update(over)
    return RoadSectionParams(**kw)


def random_section(rng):
    length = rng.uniform(80, 400)
    v = rng.uniform(10, 30)
    w = rng.uniform(4, 10)
    q = rng.uniform(0.2, 0.7)
    n_max = length * (q / v + q / w) * rng.uniform(1.15, 2.5)
    return RoadSectionParams(length, v, w, q, n_max, rng.uniform(0, n_max))


def admissible_inputs(rng, q_max, horizon, dt=1.0):
    inc_f = rng.uniform(0, 2 * q_max * dt, horizon)
    inc_f[rng.random(horizon) < 0.3] = 0.0
    u_fw = Curve(np.concatenate([[0.0], np.cumsum(inc_f)]), float(np.mean(inc_f)), dt)
    inc_b = rng.uniform(0, 3 * q_max * dt, horizon)
    inc_b[rng.random(horizon) < 0.2] = 0.0
    u_bw = Curve(np.concatenate([[0.0], np.cumsum(inc_b)]), float(np.mean(inc_b)), dt)
    return u_fw, u_bw


def max_claim_excess(y_pair, claim_pair):
    worst = -np.inf
    for y, c in zip(y_pair, claim_pair):
        n = min(y.horizon, c.horizon)
        cs = c.samples[: n + 1]
        mask = ~np.isinf(cs)
        diff = cs[mask] - y.samples[: n + 1][mask]
        if diff.size:
            worst = max(worst, float(diff.max()))
    return worst


class TestParams:
    def test_geometry_guard(self):
        with pytest.raises(GeometryError):
            RoadSectionParams(200.0, 28.0, 7.0, 0.5, 5.0, 1.0)

    def test_occupancy_bounds(self):
        with pytest.raises(ConfigError):
            example_section(n0=25.0)

    def test_light_consistency(self):
        with pytest.raises(ConfigError):
            TrafficLightParams(cycle_s=60.0, green_s=20.0, red_s=30.0)


class TestSectionMatrix:
    def test_example_extraction(self):
        beta = section_service_matrix(example_section(), horizon=80, dt=5.0)
        expect = {
            (0, 0): (10.0, 7.14),
            (1, 0): (20.0, 35.71),
            (1, 1): (10.0, 28.57),
        }
        for (i, j), (offset, latency) in expect.items():
            ex = rate_latency_extraction(beta[i, j])
            assert ex["offset"] == pytest.approx(offset, abs=0.01)
            assert abs(ex["latency_s"] - latency) <= 5.0 + 1e-9
            assert ex["rate_per_s"] == pytest.approx(0.5, abs=0.01)

    def test_dominates_gridded_rate_latency(self):
        dt = 5.0
        p = example_section()
        beta = section_service_matrix(p, horizon=80, dt=dt)
        a = int(np.ceil(p.fw_lag_s / dt)) * dt
        b = int(np.ceil(p.bw_lag_s / dt)) * dt
        t = np.arange(81) * dt
        bounds = {
            (0, 0): 0.5 * np.maximum(t - a, 0) + 10,
            (0, 1): 0.5 * np.maximum(t - a, 0),
            (1, 0): 0.5 * np.maximum(t - a - b, 0) + 20,
            (1, 1): 0.5 * np.maximum(t - b, 0) + 10,
        }
        for (i, j), lb in bounds.items():
            s = np.where(np.isinf(beta[i, j].samples), 1e18, beta[i, j].samples)
            assert np.all(s[1:] >= lb[1:] - 1e-9)

    def test_zero_occupancy_zero_offset(self):
        beta = section_service_matrix(example_section(n0=0.0), horizon=40, dt=5.0)
        assert rate_latency_extraction(beta[0, 0])["offset"] == 0.0


class TestControlled:
    def test_full_green_equals_free(self):
        p = example_section()
        tl = TrafficLightParams(cycle_s=60.0, green_s=60.0, red_s=0.0)
        free = section_service_matrix(p, 60, 5.0)
        ctrl = controlled_section_service(p, tl, 60, 5.0)
        assert ctrl.allclose(free)

    def test_red_adds_forward_latency(self):
        p = example_section()
        tl = TrafficLightParams(cycle_s=60.0, green_s=30.0, red_s=30.0)
        ctrl = controlled_section_service(p, tl, 80, 5.0)
        free = section_service_matrix(p, 80, 5.0)
        lat_ctrl = rate_latency_extraction(ctrl[0, 0])["latency_s"]
        lat_free = rate_latency_extraction(free[0, 0])["latency_s"]
        assert lat_ctrl - lat_free == pytest.approx(30.0)

    def test_rate_scaled_by_green_share(self):
        p = example_section()
        tl = TrafficLightParams(cycle_s=60.0, green_s=30.0, red_s=30.0)
        ctrl = controlled_section_service(p, tl, 120, 5.0)
        assert rate_latency_extraction(ctrl[0, 0])["rate_per_s"] == pytest.approx(0.25, abs=0.01)


class TestComposition:
    def test_identity_composition(self):
        rng = np.random.default_rng(3)
        p = random_section(rng)
        b = section_service_matrix(p, 120, 1.0)
        from tropnet.curves import CurveMatrix, eps_curve, unit_curve

        ident = CurveMatrix(
            [
                [unit_curve(120), eps_curve(120)],
                [eps_curve(120), unit_curve(120)],
            ]
        )
        composed = concatenate(b, ident)
        for i in range(2):
            for j in range(2):
                assert composed[i, j].allclose(b[i, j], 1e-9)

    def test_two_identical_sections_double_latency(self):
        p = example_section(n0=0.0)
        b = section_service_matrix(p, 120, 1.0)
        both = concatenate(b, b)
        one_lat = rate_latency_extraction(b[0, 0])["latency_s"]
        two_lat = rate_latency_extraction(both[0, 0])["latency_s"]
        assert two_lat == pytest.approx(2 * one_lat, abs=1.0)

    def test_feedback_of_identity_like(self):
        p = example_section()
        beta = section_service_matrix(p, 100, 1.0)
        ring = feedback(beta)
        # growth rate of the forward entry stays below capacity
        fw = ring[0, 0]
        finite = ~np.isinf(fw.samples)
        idx = np.nonzero(finite)[0]
        span = idx[-1] - idx[len(idx) // 2]
        slope = (fw.samples[idx[-1]] - fw.samples[idx[len(idx) // 2]]) / span
        assert slope <= p.capacity + 1e-9


class TestSimulator:
    def test_causality(self):
        p = example_section()
        bad = Curve(np.linspace(1, 10, 41))
        good = Curve(np.linspace(0, 10, 41))
        with pytest.raises(CausalityError):
            cell_transmission_simulate(p, bad, good)

    def test_drain_of_initial_vehicles(self):
        p = example_section(n0=10.0)
        h = 60
        u_fw = Curve(np.zeros(h + 1), 0.0)
        u_bw = Curve(np.concatenate([[0.0], np.full(h, 1e6)]), 1e6)
        y_fw, _ = cell_transmission_simulate(p, u_fw, u_bw)
        assert y_fw.samples[-1] == pytest.approx(10.0)
        assert np.all(np.diff(y_fw.samples) >= -1e-12)

    def test_step_demand_tracks_with_latency(self):
        p = example_section(n0=0.0)
        h = 100
        dt = 1.0
        a = int(np.ceil(p.fw_lag_s / dt))
        rate = 0.3 * dt  # under capacity
        t = np.arange(h + 1, dtype=float)
        u_fw = Curve(rate * t, rate)
        u_bw = Curve(np.concatenate([[0.0], np.full(h, 1e6)]), 1e6)
        y_fw, _ = cell_transmission_simulate(p, u_fw, u_bw)
        for k in range(a + 1, h + 1):
            assert y_fw.samples[k] == pytest.approx(rate * (k - a))

    @pytest.mark.parametrize("seed", range(4))
    def test_soundness_small_sweep(self, seed):
        rng = np.random.default_rng(1000 + seed)
        h = 200
        for _ in range(8):
            p = random_section(rng)
            u_fw, u_bw = admissible_inputs(rng, p.capacity, h)
            beta = section_service_matrix(p, h, 1.0)
            y = cell_transmission_simulate(p, u_fw, u_bw)
            assert max_claim_excess(y, beta.vecmul([u_fw, u_bw])) <= 1e-7

            g, r = float(rng.uniform(10, 40)), float(rng.uniform(5, 40))
            tl = TrafficLightParams(g + r, g, r)
            beta = controlled_section_service(p, tl, h, 1.0)
            y = cell_transmission_simulate([(p, tl)], u_fw, u_bw)
            assert max_claim_excess(y, beta.vecmul([u_fw, u_bw])) <= 1e-7

            p2 = random_section(rng)
            beta = concatenate(
                section_service_matrix(p, h, 1.0), section_service_matrix(p2, h, 1.0)
            )
            y = cell_transmission_simulate([p, p2], u_fw, u_bw)
            assert max_claim_excess(y, beta.vecmul([u_fw, u_bw])) <= 1e-7

            beta = feedback(section_service_matrix(p, h, 1.0))
            y = ring_simulate(p, u_fw, u_bw)
            assert max_claim_excess(y, beta.vecmul([u_fw, u_bw])) <= 1e-7

    def test_chain_direct_simulation_consistency(self):
        # simulating a 2-section road directly never violates the
        # concatenated per-section bound
        rng = np.random.default_rng(77)
        h = 200
        p1, p2 = random_section(rng), random_section(rng)
        u_fw, u_bw = admissible_inputs(rng, min(p1.capacity, p2.capacity), h)
        beta = concatenate(
            section_service_matrix(p1, h, 1.0), section_service_matrix(p2, h, 1.0)
        )
        y = cell_transmission_simulate([p1, p2], u_fw, u_bw)
        assert max_claim_excess(y, beta.vecmul([u_fw, u_bw])) <= 1e-7


def reference_route(v=14.0, w=10.0, rho_j=0.095):
    def sec(length, q, n):
        return RoadSectionParams(length, v, w, q, rho_j * length, n)

    return [
        (sec(150.0, 0.32, 5.0), TrafficLightParams(60.0, 30.0, 30.0)),
        (sec(150.0, 0.35, 10.0), TrafficLightParams(90.0, 50.0, 40.0)),
        (sec(100.0, 0.4, 3.0), TrafficLightParams(80.0, 45.0, 35.0)),
        (sec(100.0, 0.38, 7.0), None),
    ]


def reference_inputs(horizon=1600, rate=0.15, jump=2.0):
    t = np.arange(horizon + 1, dtype=float)
    u1 = np.where(t > 0, jump + 9 * rate + rate * np.maximum(t - 69.0, 0.0), 0.0)
    u2 = np.where(t > 0, jump + rate * t, 0.0)
    return Curve(u1, rate), Curve(u2, rate)


class TestItinerary:
    def test_single_free_section_latency_only(self):
        p = example_section(n0=0.0)
        h = 300
        rate = 0.2
        t = np.arange(h + 1, dtype=float)
        u1 = Curve(rate * t, rate)
        u2 = Curve(rate * t, rate)
        res = itinerary_delay([p], u1, u2, horizon=h)
        a = int(np.ceil(p.fw_lag_s))
        assert res["raw"]["delay_steps"][0] <= a + 1

    def test_reference_itinerary_reproduces_published_bound(self):
        route = reference_route()
        u1, u2 = reference_inputs()
        res = itinerary_delay(route, u1, u2, horizon=1600)
        t = res["time_shift_steps"]
        assert t[0, 1] == 60 and t[1, 0] == 8
        comps = res["net"]["components_steps"][0]
        assert comps[0] == pytest.approx(205.0, abs=1.0)
        assert comps[1] == pytest.approx(241.0, abs=1.0)
        assert max(comps) == pytest.approx(241.0, abs=1.0)

    def test_adding_red_increases_delay_boundedly(self):
        route = reference_route()
        u1, u2 = reference_inputs(horizon=1200)
        base = itinerary_delay(route, u1, u2, horizon=1200)
        d0 = max(base["net"]["components_steps"][0])
        extra = 20.0
        p4 = route[3][0]
        mod = route[:3] + [(p4, TrafficLightParams(60.0, 60.0 - extra, extra))]
        res = itinerary_delay(mod, u1, u2, horizon=1200)
        d1 = max(res["net"]["components_steps"][0])
        assert d0 - 1e-9 <= d1 <= d0 + extra + 1e-9

    def test_default_horizon_scales(self):
        route = reference_route()
        assert default_horizon(route, 1.0) >= 4 * 100


class TestMonotonicity:
    def test_offset_tracks_initial_vehicles(self):
        for n0 in (0.0, 4.0, 9.0):
            beta = section_service_matrix(example_section(n0=n0), 60, 5.0)
            assert rate_latency_extraction(beta[0, 0])["offset"] == pytest.approx(n0)

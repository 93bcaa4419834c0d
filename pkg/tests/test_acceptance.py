"""Acceptance criteria: one test per criterion, each printing a
pass/fail line (run with ``pytest tests/test_acceptance.py -v -s``).

Every tolerance is pinned here, not configurable.
"""

import time

import numpy as np
import pytest

from tropnet import carfollow, metro, metro_dp, roadcalc, validate
from tropnet.curves import Curve
from tropnet.dpsolve import growth_rate, iterate

RESULTS = []


def _report(num: int, desc: str, ok: bool, detail: str = ""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {desc}"
    if detail:
        line += f"  ({detail})"
    print(line)
    RESULTS.append((num, ok))
    assert ok, line


# ---------------------------------------------------------------------------

def test_criterion_01_line14_reproduction():
    t0 = time.perf_counter()
    cfg = metro.line14_config()
    pts = metro.phase_diagram(cfg)
    elapsed = time.perf_counter() - t0
    finite = [p for p in pts if np.isfinite(p.h_s) and 0 < p.m < cfg.n]
    h_min = min(p.h_s for p in finite)
    first_at = next(p.m for p in finite if abs(p.h_s - h_min) < 1e-9)
    f_max = max(p.f_per_h for p in finite)
    ok = (
        abs(h_min - 72.0) <= 1.0
        and abs(first_at - 21) <= 1
        and abs(f_max - 50.0) <= 1.0
        and elapsed < 1.0
    )
    _report(1, "line-14 phase diagram: 50 trains/h, 72 s headway at m=21", ok,
            f"h_min={h_min:.2f}s first_at={first_at} f_max={f_max:.2f}/h in {elapsed:.2f}s")


def test_criterion_02_spectral_vs_closed_form():
    t0 = time.perf_counter()
    fam = validate.check_line_solvers(seed=2024, cases=200, max_segments=40)
    elapsed = time.perf_counter() - t0
    ok = fam.failures == 0 and elapsed < 30.0
    _report(2, "closed-form headway = spectral solver = brute force (200 lines)",
            ok, f"{fam.cases - fam.failures}/{fam.cases} in {elapsed:.1f}s")


def test_criterion_03_example32_service_matrix():
    dt = 5.0
    p = roadcalc.RoadSectionParams(200.0, 28.0, 7.0, 0.5, 20.0, 10.0)
    beta = roadcalc.section_service_matrix(p, horizon=120, dt=dt)
    targets = {(0, 0): (10.0, 7.14), (1, 0): (20.0, 35.71), (1, 1): (10.0, 28.57)}
    ok = True
    details = []
    for (i, j), (offset, latency) in targets.items():
        ex = roadcalc.rate_latency_extraction(beta[i, j])
        ok &= abs(ex["offset"] - offset) <= 0.01
        ok &= abs(ex["rate_per_s"] - 0.5) <= 0.01
        ok &= abs(ex["latency_s"] - latency) <= dt + 1e-9
        details.append(f"b{i+1}{j+1}: {ex['offset']:.2f}veh/{ex['latency_s']:.0f}s/{ex['rate_per_s']:.3f}veh/s")
    # domination of the gridded rate-latency minorants for t >= 1 step
    a = np.ceil(p.fw_lag_s / dt) * dt
    b = np.ceil(p.bw_lag_s / dt) * dt
    t = np.arange(121) * dt
    minorants = {
        (0, 0): 0.5 * np.maximum(t - a, 0) + 10,
        (0, 1): 0.5 * np.maximum(t - a, 0),
        (1, 0): 0.5 * np.maximum(t - a - b, 0) + 20,
        (1, 1): 0.5 * np.maximum(t - b, 0) + 10,
    }
    for (i, j), lb in minorants.items():
        s = np.where(np.isinf(beta[i, j].samples), np.inf, beta[i, j].samples)
        ok &= bool(np.all(s[1:] >= lb[1:] - 1e-9))
    _report(3, "example road section: rate 0.5 veh/s, latencies {7.14, 35.71, 28.57}",
            ok, "; ".join(details))


def _reference_route():
    def sec(length, q, n):
        return roadcalc.RoadSectionParams(length, 14.0, 10.0, q, 0.095 * length, n)

    return [
        (sec(150.0, 0.32, 5.0), roadcalc.TrafficLightParams(60.0, 30.0, 30.0)),
        (sec(150.0, 0.35, 10.0), roadcalc.TrafficLightParams(90.0, 50.0, 40.0)),
        (sec(100.0, 0.4, 3.0), roadcalc.TrafficLightParams(80.0, 45.0, 35.0)),
        (sec(100.0, 0.38, 7.0), None),
    ]


def test_criterion_04_itinerary_bound():
    rate = 0.15
    t = np.arange(1601, dtype=float)
    u_fw = Curve(np.where(t > 0, 2.0 + 9 * rate + rate * np.maximum(t - 69.0, 0.0), 0.0), rate)
    u_bw = Curve(np.where(t > 0, 2.0 + rate * t, 0.0), rate)
    res = roadcalc.itinerary_delay(_reference_route(), u_fw, u_bw, horizon=1600)
    t_mat = res["time_shift_steps"]
    comps = res["net"]["components_steps"][0]
    d1 = float(np.max(comps))
    ok = (
        t_mat[0, 1] == 60
        and t_mat[1, 0] == 8
        and abs(comps[0] - 205.0) <= 1.0
        and abs(comps[1] - 241.0) <= 1.0
        and abs(d1 - 241.0) <= 1.0
    )
    _report(4, "four-road itinerary: T=(60,8), d_1 = max(205, 241) = 241 s", ok,
            f"components=({comps[0]:.0f}, {comps[1]:.0f})")


def test_criterion_05_service_bound_soundness():
    t0 = time.perf_counter()
    fam = validate.check_service_soundness(seed=7, cases_per_class=500, systems=50)
    elapsed = time.perf_counter() - t0
    ok = fam.failures == 0 and elapsed < 120.0
    _report(5, "soundness Y >= beta*U: 500 input pairs x 4 system classes", ok,
            f"{fam.cases - fam.failures}/{fam.cases} in {elapsed:.1f}s")


def test_criterion_06_dp_dominance_and_equivalence():
    cfg = metro.line14_config(21)
    # equivalence at delta = 1, dwell cap = reference headway, K = 5000
    prof = metro_dp.DemandProfile.uniform(cfg, lam=2.0, alpha=30.0, kappa=500.0)
    params = metro_dp.fix_params(cfg, prof, 21)
    dyn = metro_dp.build_controlled(cfg, params)
    res = metro_dp.simulate_headway(cfg, dyn, k_steps=5000)
    h_ref = metro.headway_closed_form(cfg, 21)
    equiv_ok = abs(res["h"] - h_ref) <= 1e-6

    rows = metro_dp.demand_phase_surface(
        cfg,
        lam_levels=[0.0, 4.0, 8.0, 12.0, 16.0, 20.0],
        m_values=[8, 12, 16, 21, 26, 32, 40, 48, 56, 64],
        alpha=30.0,
        kappa=500.0,
        k_steps=2000,
    )
    dominance_ok = all(r["h"] >= r["h_ref"] - 1e-9 for r in rows)
    mono_ok = True
    for m in {r["m"] for r in rows}:
        hs = [r["h"] for r in rows if r["m"] == m]
        mono_ok &= all(b >= a - 1e-9 for a, b in zip(hs, hs[1:]))
    ok = equiv_ok and dominance_ok and mono_ok and len(rows) >= 50
    _report(6, "controlled DP: h >= h~ on 60-point grid; equality at delta=1 (K=5000)",
            ok, f"|h-h~|={abs(res['h'] - h_ref):.2e}, {len(rows)} points")


def test_criterion_07_uncontrolled_instability():
    cfg = metro.line14_config(21)
    prof = metro_dp.DemandProfile.uniform(cfg, lam=10.0, alpha=30.0, kappa=500.0)
    curve = metro_dp.instability_curve(cfg, prof, k_values=(250, 500, 1000, 2000),
                                       perturbation_s=30.0)
    ok = all(b > a for a, b in zip(curve, curve[1:]))
    _report(7, "uncontrolled demand coupling diverges (K=250..2000)", ok,
            "estimates " + " < ".join(f"{c:.3g}" for c in curve))


def test_criterion_08_carfollow_stationary_and_smoothing():
    fam = validate.check_carfollow_stationary(seed=11, cases=50)
    residuals_ok = fam.failures == 0

    law = carfollow.saturating_law(0.5, 10.0, y_min=2.0)
    ring = carfollow.RingScenario(12, 12.0)
    rng = np.random.default_rng(5)
    x0 = carfollow.uniform_positions(12, 12.0) + rng.uniform(-2, 2, 12)
    rates = []
    for m in (1, 5, 10):
        d = carfollow.build_dynamics(ring, carfollow.AnticipationConfig(m, 0.05), law)
        mu, _ = growth_rate(iterate(d, x0, 400))
        rates.append(mu)
    speed_ok = max(rates) - min(rates) <= 1e-6

    bench_law = carfollow.saturating_law(0.6, 15.0, y_min=7.0)
    profile = carfollow.benchmark_leader_profile()
    x0b = carfollow.uniform_positions(40, 25.0) + 9000.0
    variances = {}
    for m in (1, 5):
        traj = carfollow.simulate_open(
            carfollow.OpenScenario(40, 12.0), carfollow.AnticipationConfig(m, 0.0),
            bench_law, x0b, profile,
        )
        variances[m] = carfollow.transient_metrics(traj)["speed_variance"]
    smoothing_ok = variances[5] < variances[1]
    ok = residuals_ok and speed_ok and smoothing_ok
    _report(8, "car-following: stationary residuals, m-invariant speed, smoothing",
            ok, f"res {fam.cases - fam.failures}/{fam.cases}; var m5 {variances[5]:.3f} < m1 {variances[1]:.3f}")


def test_criterion_09_junction_surface():
    def factory(m, dm):
        n0, nb = 20, 12
        branch_total = m - round(m * n0 / (n0 + 2 * nb))
        m1 = (branch_total - dm) // 2
        m2 = m1 + dm
        m0 = m - m1 - m2
        return metro.JunctionConfig(
            n_parts=(n0, nb, nb),
            m_parts=(m0, m1, m2),
            travel_sums=(30.0 * n0, 30.0 * nb, 30.0 * nb),
            sep_sums=(15.0 * n0, 15.0 * nb, 15.0 * nb),
            max_travel_plus_sep=(45.0, 45.0, 45.0),
        )

    rows = metro.junction_surface(factory, range(2, 43), range(-14, 15, 2))
    halves_ok = all(
        r["h1"] == pytest.approx(2 * r["h0"]) and r["h2"] == pytest.approx(2 * r["h0"])
        for r in rows
        if np.isfinite(r["h0"])
    )
    labels = {r["binding"] for r in rows}
    ok = halves_ok and len(labels) == 8
    _report(9, "junction: h0 = h1/2 = h2/2; eight binding regions", ok,
            f"labels={sorted(labels)}")


def test_criterion_10_algebra_suites():
    t0 = time.perf_counter()
    fams = [
        validate.check_semiring_laws(0, 200),
        validate.check_dioid_laws(3, 60),
        validate.check_residuation(4, 60),
        validate.check_closure_inequalities(5),
        validate.check_max_subsolution(6, 20),
    ]
    elapsed = time.perf_counter() - t0
    ok = all(f.failures == 0 for f in fams) and elapsed < 60.0
    detail = ", ".join(f"{f.name} {f.cases - f.failures}/{f.cases}" for f in fams)
    _report(10, "algebra suites: semiring, dioid, residuation, closure, subsolution",
            ok, f"{detail} in {elapsed:.1f}s")


def test_zz_summary():
    passed = sum(1 for _, ok in RESULTS if ok)
    print(f"\nacceptance: {passed}/{len(RESULTS)} criteria passed")
    assert passed == len(RESULTS)

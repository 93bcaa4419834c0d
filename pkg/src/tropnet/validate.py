"""Cross-solver validation: every closed form checked against an
independent oracle (brute force, simulation, or algebraic identity).

Each family runs a seeded corpus and reports case/failure counts; the CLI
``validate`` verb and the acceptance suite both run these.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import carfollow, metro, roadcalc
from .curves import (
    Curve,
    closure,
    cmin,
    conv,
    deconv,
    gain_shift_closure,
    gain_shift_curve,
    unit_curve,
)
from .maxplus import (
    TROPICAL_ZERO,
    TropicalMatrix,
    build_precedence_graph,
    enumerate_cycle_ratios,
    generalized_eigenvector,
    max_cycle_ratio,
)

__all__ = ["Family", "run_all", "FAMILIES"]


@dataclass
class Family:
    name: str
    cases: int
    failures: int
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.failures == 0


def _random_matrix(rng, n, density=0.6):
    m = np.full((n, n), TROPICAL_ZERO)
    mask = rng.random((n, n)) < density
    m[mask] = rng.uniform(-5, 5, size=int(mask.sum()))
    return TropicalMatrix(m)


def check_semiring_laws(seed: int, cases: int = 200) -> Family:
    rng = np.random.default_rng(seed)
    failures = 0
    t0 = time.perf_counter()
    for _ in range(cases):
        n = int(rng.integers(1, 7))
        a, b, c = (_random_matrix(rng, n) for _ in range(3))
        ok = (
            ((a + b) + c) == (a + (b + c))
            and (a + b) == (b + a)
            and (a + a) == a
            and ((a @ b) @ c).allclose(a @ (b @ c), 1e-12)
            and (a @ (b + c)).allclose((a @ b) + (a @ c), 1e-12)
            and (a @ TropicalMatrix.zeros(n)) == TropicalMatrix.zeros(n)
        )
        failures += 0 if ok else 1
    return Family("maxplus-semiring-laws", cases, failures, time.perf_counter() - t0)


def check_line_solvers(seed: int, cases: int = 200, max_segments: int = 40) -> Family:
    """Closed-form headway vs spectral solver vs brute-force enumeration."""
    rng = np.random.default_rng(seed)
    failures = 0
    t0 = time.perf_counter()
    for _ in range(cases):
        cfg = metro.random_line_config(rng, max_segments=max_segments)
        h = metro.headway_closed_form(cfg)
        poly = metro.build_line_polymatrix(cfg)
        g = build_precedence_graph(poly)
        mu, _ = max_cycle_ratio(g)
        ok = abs(mu - h) <= 1e-9
        if ok and cfg.n <= 8:
            brute = enumerate_cycle_ratios(g)
            ok = abs(brute[0][0] - h) <= 1e-9
        failures += 0 if ok else 1
    return Family("line-headway-three-solvers", cases, failures, time.perf_counter() - t0)


def check_eigenvector_residuals(seed: int, cases: int = 50) -> Family:
    rng = np.random.default_rng(seed)
    failures = 0
    t0 = time.perf_counter()
    for _ in range(cases):
        cfg = metro.random_line_config(rng, max_segments=15)
        poly = metro.build_line_polymatrix(cfg)
        mu, _ = max_cycle_ratio(build_precedence_graph(poly))
        try:
            v = generalized_eigenvector(poly, mu)
            b = poly.evaluate(-mu)
            ok = float(np.max(np.abs(b.vecmul(v) - v))) <= 1e-6
        except Exception:
            ok = False
        failures += 0 if ok else 1
    return Family("generalized-eigenvector-residuals", cases, failures, time.perf_counter() - t0)


def _random_flow(rng, horizon=120):
    inc = rng.uniform(0, 3.0, horizon)
    inc[rng.random(horizon) < 0.3] = 0.0
    return Curve(np.concatenate([[0.0], np.cumsum(inc)]), float(np.mean(inc)))


def _random_positive_curve(rng, horizon=120):
    inc = rng.uniform(0, 2.0, horizon)
    return Curve(
        rng.uniform(0.5, 5.0) + np.concatenate([[0.0], np.cumsum(inc)]),
        float(np.mean(inc)),
    )


def check_dioid_laws(seed: int, cases: int = 60) -> Family:
    rng = np.random.default_rng(seed)
    failures = 0
    t0 = time.perf_counter()
    for _ in range(cases):
        f, g, h = (_random_flow(rng, 60) for _ in range(3))
        ok = (
            conv(f, g).allclose(conv(g, f))
            and conv(conv(f, g), h).allclose(conv(f, conv(g, h)), 1e-9)
            and cmin(f, f).allclose(f)
            and conv(f, cmin(g, h)).allclose(cmin(conv(f, g), conv(f, h)), 1e-9)
            and conv(unit_curve(60), f).allclose(f)
        )
        failures += 0 if ok else 1
    return Family("minplus-dioid-laws", cases, failures, time.perf_counter() - t0)


def check_residuation(seed: int, cases: int = 60) -> Family:
    rng = np.random.default_rng(seed)
    failures = 0
    t0 = time.perf_counter()
    for _ in range(cases):
        f, g = _random_flow(rng, 80), _random_flow(rng, 80)
        if g.finite_tail_rate() < f.finite_tail_rate():
            f, g = g, f
        back = conv(deconv(f, g), g)
        n = min(back.horizon, f.horizon)
        ok = bool(np.all(back.samples[: n + 1] >= f.samples[: n + 1] - 1e-9))
        failures += 0 if ok else 1
    return Family("deconv-residuation", cases, failures, time.perf_counter() - t0)


def check_closure_inequalities(seed: int = 0) -> Family:
    """Gain-shift closure growth bounds on p, tau in {1..5}."""
    failures = 0
    cases = 0
    t0 = time.perf_counter()
    t = np.arange(81, dtype=float)
    for p in range(1, 6):
        for tau in range(1, 6):
            cases += 1
            star = gain_shift_closure(float(p), float(tau), 80)
            if not np.all(star.samples >= (p / tau) * t - 1e-9):
                failures += 1
            for (p2, t2) in ((1, 3), (2, 1)):
                cases += 1
                atom = gain_shift_curve(float(p2), t2, 80)
                lhs = conv(atom, star)
                rhs = (p / tau) * np.maximum(t - (t2 - tau * p2 / p), 0.0)
                if not np.all(lhs.samples >= rhs - 1e-9):
                    failures += 1
    return Family("gain-shift-closure-bounds", cases, failures, time.perf_counter() - t0)


def check_max_subsolution(seed: int, cases: int = 20) -> Family:
    from .curves import CurveMatrix, matrix_closure

    rng = np.random.default_rng(seed)
    failures = 0
    t0 = time.perf_counter()
    for _ in range(cases):
        n = 2
        f = CurveMatrix([[_random_positive_curve(rng, 50) for _ in range(n)] for _ in range(n)])
        u = [_random_flow(rng, 50) for _ in range(n)]
        y = matrix_closure(f).vecmul(u)
        fy = f.vecmul(y)
        ok = all(y[i].allclose(cmin(fy[i], u[i]), 1e-9) for i in range(n))
        if ok:
            w = [_random_flow(rng, 50) for _ in range(n)]
            for _ in range(60):
                fw = f.vecmul(w)
                w = [cmin(w[i], cmin(fw[i], u[i])) for i in range(n)]
            ok = all(bool(np.all(w[i].samples <= y[i].samples + 1e-9)) for i in range(n))
        failures += 0 if ok else 1
    return Family("feedback-max-subsolution", cases, failures, time.perf_counter() - t0)


def _random_section(rng):
    length = rng.uniform(80, 400)
    v = rng.uniform(10, 30)
    w = rng.uniform(4, 10)
    q = rng.uniform(0.2, 0.7)
    n_max = length * (q / v + q / w) * rng.uniform(1.15, 2.5)
    return roadcalc.RoadSectionParams(length, v, w, q, n_max, rng.uniform(0, n_max))


def _admissible_inputs(rng, q_max, horizon, dt=1.0):
    inc_f = rng.uniform(0, 2 * q_max * dt, horizon)
    inc_f[rng.random(horizon) < 0.3] = 0.0
    u_fw = Curve(np.concatenate([[0.0], np.cumsum(inc_f)]), float(np.mean(inc_f)), dt)
    inc_b = rng.uniform(0, 3 * q_max * dt, horizon)
    inc_b[rng.random(horizon) < 0.2] = 0.0
    u_bw = Curve(np.concatenate([[0.0], np.cumsum(inc_b)]), float(np.mean(inc_b)), dt)
    return u_fw, u_bw


def _claim_holds(y_pair, claim_pair, tol=1e-7) -> bool:
    for y, c in zip(y_pair, claim_pair):
        n = min(y.horizon, c.horizon)
        cs = c.samples[: n + 1]
        mask = ~np.isinf(cs)
        if np.any(cs[mask] - y.samples[: n + 1][mask] > tol):
            return False
    return True


def check_service_soundness(seed: int, cases_per_class: int = 500,
                            systems: int = 50, horizon: int = 220) -> Family:
    """Cell-transmission output dominates beta * U for every system class."""
    rng = np.random.default_rng(seed)
    failures = 0
    total = 0
    t0 = time.perf_counter()
    per_system = max(1, cases_per_class // systems)
    for _ in range(systems):
        p = _random_section(rng)
        p2 = _random_section(rng)
        g, r = float(rng.uniform(10, 40)), float(rng.uniform(5, 40))
        tl = roadcalc.TrafficLightParams(g + r, g, r)
        betas = {
            "free": roadcalc.section_service_matrix(p, horizon, 1.0),
            "signal": roadcalc.controlled_section_service(p, tl, horizon, 1.0),
            "chain": roadcalc.concatenate(
                roadcalc.section_service_matrix(p, horizon, 1.0),
                roadcalc.section_service_matrix(p2, horizon, 1.0),
            ),
            "ring": roadcalc.feedback(roadcalc.section_service_matrix(p, horizon, 1.0)),
        }
        for _ in range(per_system):
            u_fw, u_bw = _admissible_inputs(rng, p.capacity, horizon)
            sims = {
                "free": roadcalc.cell_transmission_simulate(p, u_fw, u_bw),
                "signal": roadcalc.cell_transmission_simulate([(p, tl)], u_fw, u_bw),
                "chain": roadcalc.cell_transmission_simulate([p, p2], u_fw, u_bw),
                "ring": roadcalc.ring_simulate(p, u_fw, u_bw),
            }
            for name, beta in betas.items():
                total += 1
                claim = beta.vecmul([u_fw, u_bw])
                if not _claim_holds(sims[name], claim):
                    failures += 1
    return Family("service-bound-soundness", total, failures, time.perf_counter() - t0)


def check_carfollow_stationary(seed: int, cases: int = 50) -> Family:
    from .errors import RangeError, StabilityError

    rng = np.random.default_rng(seed)
    failures = 0
    done = 0
    t0 = time.perf_counter()
    while done < cases:
        n_u = int(rng.integers(1, 4))
        n_w = int(rng.integers(1, 3))
        law = carfollow.BehaviorLaw(
            alpha=rng.uniform(0.05, 1.0, (n_u, n_w)),
            beta=rng.uniform(0.0, 10.0, (n_u, n_w)),
        )
        cars = int(rng.integers(2, 8))
        try:
            ring = carfollow.stationary_ring(
                carfollow.RingScenario(cars, float(rng.uniform(2, 40))),
                carfollow.AnticipationConfig(
                    int(rng.integers(1, min(4, cars) + 1)), float(rng.uniform(0, 0.3))
                ),
                law,
            )
            open_res = carfollow.stationary_open(
                float(rng.uniform(0.5, 4.0)),
                carfollow.AnticipationConfig(int(rng.integers(1, 4)), float(rng.uniform(0, 0.3))),
                law,
            )
        except (RangeError, StabilityError):
            continue
        ok = ring["residual"] <= 1e-9 and open_res["residual"] <= 1e-9
        failures += 0 if ok else 1
        done += 1
    return Family("carfollow-stationary-residuals", cases, failures, time.perf_counter() - t0)


FAMILIES = (
    "maxplus-semiring-laws",
    "line-headway-three-solvers",
    "generalized-eigenvector-residuals",
    "minplus-dioid-laws",
    "deconv-residuation",
    "gain-shift-closure-bounds",
    "feedback-max-subsolution",
    "service-bound-soundness",
    "carfollow-stationary-residuals",
)


def run_all(seed: int = 0, quick: bool = False) -> list[Family]:
    scale = 0.1 if quick else 1.0

    def n(x):
        return max(5, int(x * scale))

    return [
        check_semiring_laws(seed, n(200)),
        check_line_solvers(seed + 1, n(200)),
        check_eigenvector_residuals(seed + 2, n(50)),
        check_dioid_laws(seed + 3, n(60)),
        check_residuation(seed + 4, n(60)),
        check_closure_inequalities(seed + 5),
        check_max_subsolution(seed + 6, n(20)),
        check_service_soundness(seed + 7, n(500), systems=n(50)),
        check_carfollow_stationary(seed + 8, n(50)),
    ]

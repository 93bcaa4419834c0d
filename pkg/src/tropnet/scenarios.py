"""Scenario configs: YAML schemas, builders, and the per-kind runners.

A scenario file is a small key-value tree with a ``kind`` selecting the
analysis, a payload section for that kind, and an ``output`` CSV name.
Runners return a list of (filename, header, rows) artifacts so the CLI can
write them with a manifest sidecar; fixed seeds make artifacts
byte-reproducible.
"""

from __future__ import annotations

import numpy as np
import yaml

from . import carfollow, metro, metro_dp, roadcalc
from .curves import Curve
from .errors import ConfigError
from .metro import LineConfig

KNOWN_KINDS = (
    "metro-phases",
    "metro-junction",
    "metro-demand-mp",
    "metro-dp-surface",
    "road-bounds",
    "road-itinerary",
    "carfollow-bench",
    "validate",
)

__all__ = ["load_scenario", "run_scenario", "KNOWN_KINDS", "bundled_scenarios"]


def load_scenario(path) -> dict:
    with open(path, "r") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError("scenario file must hold a mapping")
    kind = data.get("kind")
    if kind not in KNOWN_KINDS:
        raise ConfigError(f"unknown scenario kind {kind!r}; expected one of {KNOWN_KINDS}")
    if "output" not in data and kind != "validate":
        raise ConfigError("scenario needs an 'output' CSV name")
    return data


def bundled_scenarios() -> dict[str, str]:
    """Name -> path of the scenario files shipped with the package."""
    from importlib import resources

    out = {}
    pkg = resources.files("tropnet") / "scenarios"
    for entry in sorted(pkg.iterdir()):
        if entry.name.endswith(".yaml"):
            out[entry.name] = str(entry)
    return out


# ---------------------------------------------------------------------------
# Shared builders
# ---------------------------------------------------------------------------

def line_from_config(cfg: dict) -> LineConfig:
    if "stations" in cfg:
        st = cfg["stations"]
        return metro.line_from_stations(
            [float(x) for x in st["inter_station_m"]],
            v_run=float(st["v_run"]),
            min_dwell_s=float(st["min_dwell_s"]),
            min_sep_s=float(st["min_sep_s"]),
            segment_target_m=float(st.get("segment_target_m", 200.0)),
            turnaround_run_s=[float(x) for x in st.get("turnaround_run_s", [])],
            turnaround_length_m=float(st.get("turnaround_length_m", 0.0)),
            trains=int(st.get("trains", 1)),
        )
    if "explicit" in cfg:
        ex = cfg["explicit"]
        return LineConfig(
            run_s=np.asarray(ex["run_s"], dtype=float),
            min_dwell_s=np.asarray(ex["min_dwell_s"], dtype=float),
            min_sep_s=np.asarray(ex["min_sep_s"], dtype=float),
            platform=np.asarray(ex["platform"], dtype=bool),
            length_m=np.asarray(ex["length_m"], dtype=float),
            trains_at=np.asarray(ex["trains_at"], dtype=int),
        )
    raise ConfigError("line config needs a 'stations' or 'explicit' section")


def flow_from_config(cfg: dict, horizon: int, dt: float) -> Curve:
    """Cumulative flow: jump and burst just after t=0, then a delayed ramp,
    plus an optional pause window."""
    rate = float(cfg.get("rate", 0.0)) * dt
    jump = float(cfg.get("jump", 0.0))
    burst = float(cfg.get("burst", 0.0))
    ramp_start = float(cfg.get("ramp_start_s", 0.0)) / dt
    t = np.arange(horizon + 1, dtype=float)
    samples = np.where(t > 0, jump + burst + rate * np.maximum(t - ramp_start, 0.0), 0.0)
    if "pause_at_s" in cfg:
        p0 = float(cfg["pause_at_s"]) / dt
        plen = float(cfg["pause_len_s"]) / dt
        ramp = rate * np.minimum(t, p0) + rate * np.maximum(t - p0 - plen, 0.0)
        samples = np.where(t > 0, jump + burst + ramp, 0.0)
    return Curve(samples, rate, dt)


def section_from_config(cfg: dict) -> roadcalc.RoadSectionParams:
    n_max = cfg.get("n_max")
    if n_max is None:
        n_max = float(cfg["jam_density_veh_m"]) * float(cfg["length_m"])
    return roadcalc.RoadSectionParams(
        length_m=float(cfg["length_m"]),
        free_speed=float(cfg["free_speed_ms"]),
        wave_speed=float(cfg["wave_speed_ms"]),
        capacity=float(cfg["capacity_veh_s"]),
        n_max=float(n_max),
        n0=float(cfg["initial_vehicles"]),
    )


def route_from_config(items: list) -> list:
    route = []
    for item in items:
        p = section_from_config(item)
        tl = None
        if "signal" in item and item["signal"]:
            sig = item["signal"]
            green = float(sig["green_s"])
            cycle = float(sig["cycle_s"])
            tl = roadcalc.TrafficLightParams(cycle, green, cycle - green)
        route.append((p, tl))
    return route


# ---------------------------------------------------------------------------
# Runners (one per kind); each returns [(filename, header, rows)]
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isinf(x):
            return "inf"
        return repr(round(x, 9))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def run_metro_phases(data: dict, overrides: dict) -> list:
    cfg = line_from_config(data["line"])
    mr = data.get("m_range")
    m_values = range(int(mr[0]), int(mr[1]) + 1) if mr else range(0, cfg.n + 1)
    pts = metro.phase_diagram(cfg, m_values)
    rows = [
        [p.m, _fmt(p.rho), _fmt(p.h_s), _fmt(p.f_per_h), _fmt(p.w_s), _fmt(p.g_s), p.phase]
        for p in pts
    ]
    return [(data["output"], ["m", "rho", "h_s", "f_per_h", "w_s", "g_s", "phase"], rows)]


def run_metro_junction(data: dict, overrides: dict) -> list:
    j = data["junction"]
    n0, nb = int(j["n_central"]), int(j["n_branch"])
    t_seg, s_seg = float(j["travel_per_seg_s"]), float(j["sep_per_seg_s"])
    max_ts = float(j.get("max_travel_plus_sep_s", t_seg + s_seg))

    def factory(m, dm):
        branch_total = m - round(m * n0 / (n0 + 2 * nb))
        m1 = (branch_total - dm) // 2
        m2 = m1 + dm
        m0 = m - m1 - m2
        return metro.JunctionConfig(
            n_parts=(n0, nb, nb),
            m_parts=(m0, m1, m2),
            travel_sums=(t_seg * n0, t_seg * nb, t_seg * nb),
            sep_sums=(s_seg * n0, s_seg * nb, s_seg * nb),
            max_travel_plus_sep=(max_ts, max_ts, max_ts),
        )

    g = data["grid"]
    rows_out = []
    surface = metro.junction_surface(
        factory,
        range(int(g["m_min"]), int(g["m_max"]) + 1),
        range(int(g["dm_min"]), int(g["dm_max"]) + 1, int(g.get("dm_step", 1))),
    )
    for r in surface:
        rows_out.append(
            [r["m"], r["dm"], _fmt(r["h0"]), _fmt(r["h1"]), _fmt(r["h2"]),
             _fmt(r["f0"] * 3600.0 if np.isfinite(r["f0"]) else 0.0), r["binding"]]
        )
    return [(data["output"], ["m", "dm", "h0_s", "h1_s", "h2_s", "f0_per_h", "binding"], rows_out)]


def run_metro_demand_mp(data: dict, overrides: dict) -> list:
    cfg = line_from_config(data["line"])
    d = data["demand"]
    alpha_in = float(d.get("alpha_in", 20.0))
    alpha_out = float(d.get("alpha_out", 20.0))
    run_margin = float(d.get("run_margin_s", 20.0))
    g_margin = float(d.get("g_margin_s", 10.0))
    m = int(d.get("trains", cfg.m))
    # nominal runs fold the dwell into the platform segments; the control
    # margin (compressible run time) also lives at the platforms
    nominal = cfg.run_s + cfg.min_dwell_s + np.where(cfg.platform, run_margin, 0.0)
    rows = []
    for x in d["x_levels"]:
        x = float(x)
        lam_in = np.where(cfg.platform, x * alpha_in / 2.0, 0.0)
        lam_out = np.where(cfg.platform, x * alpha_out / 2.0, 0.0)
        dem = metro.DemandConfig(
            lam_in=lam_in,
            lam_out=lam_out,
            alpha_in=np.where(cfg.platform, alpha_in, 0.0),
            alpha_out=np.where(cfg.platform, alpha_out, 0.0),
            run_nominal_s=nominal,
            run_min_s=cfg.run_s.copy(),
            g_min_s=cfg.run_s + cfg.min_sep_s,
            g_max_s=cfg.run_s + cfg.min_sep_s + g_margin,
        )
        res = metro.demand_dependent_headway(cfg, dem, m)
        rows.append(
            [m, _fmt(x), _fmt(res["h"]), _fmt(res["f"] * 3600.0), str(res["conditions_ok"])]
        )
    return [(data["output"], ["m", "x", "h_s", "f_per_h", "conditions_ok"], rows)]


def run_metro_dp_surface(data: dict, overrides: dict) -> list:
    cfg = line_from_config(data["line"])
    d = data["demand"]
    k_steps = int(overrides.get("iters") or d.get("k_steps", 2000))
    rows_raw = metro_dp.demand_phase_surface(
        cfg,
        lam_levels=[float(x) for x in d["lam_levels"]],
        m_values=[int(x) for x in d["m_values"]],
        alpha=float(d["alpha"]),
        kappa=float(d["kappa"]),
        k_steps=k_steps,
    )
    rows = [
        [r["m"], _fmt(r["lambda"]), _fmt(r["h"]), _fmt(r["f"] * 3600.0),
         _fmt(r["w"]), _fmt(r["g"]), str(r["converged"])]
        for r in rows_raw
    ]
    artifacts = [(data["output"], ["m", "lambda", "h_s", "f_per_h", "w_s", "g_s", "converged"], rows)]
    if any(not r["converged"] for r in rows_raw):
        bad = sum(1 for r in rows_raw if not r["converged"])
        artifacts.append(("__warning__", None, f"{bad} surface points did not converge"))
    return artifacts


def run_road_bounds(data: dict, overrides: dict) -> list:
    dt = float(data.get("time_step_s", 1.0))
    route = route_from_config(data["sections"])
    horizon = int(overrides.get("horizon") or data.get("horizon_steps")
                  or roadcalc.default_horizon(route, dt))
    if len(route) == 1 and route[0][1] is None:
        beta = roadcalc.section_service_matrix(route[0][0], horizon, dt)
    else:
        beta = roadcalc.itinerary_service_matrix(route, horizon, dt)
    rows = []
    u_fw = flow_from_config(data["inputs"]["forward"], horizon, dt)
    u_bw = flow_from_config(data["inputs"]["backward"], horizon, dt)
    from .curves import arrival_matrix, backlog_bound, mimo_delay_bound

    alpha, t_mat = arrival_matrix([u_fw, u_bw])
    delays = mimo_delay_bound(alpha, t_mat, beta)
    for i in range(2):
        for j in range(2):
            ex = roadcalc.rate_latency_extraction(beta[i, j])
            back = backlog_bound(alpha.entries[i][j], beta.entries[i][j])
            rows.append(
                [f"{i + 1}-{j + 1}", _fmt(ex["offset"]), _fmt(ex["latency_s"]),
                 _fmt(ex["rate_per_s"]), _fmt(delays["components_steps"][i][j] * dt),
                 _fmt(back)]
            )
    return [(
        data["output"],
        ["pair", "offset_veh", "latency_s", "rate_veh_s", "delay_bound_s", "backlog_bound_veh"],
        rows,
    )]


def run_road_itinerary(data: dict, overrides: dict) -> list:
    dt = float(data.get("time_step_s", 1.0))
    route = route_from_config(data["sections"])
    horizon = int(overrides.get("horizon") or data.get("horizon_steps")
                  or roadcalc.default_horizon(route, dt))
    u_fw = flow_from_config(data["inputs"]["forward"], horizon, dt)
    u_bw = flow_from_config(data["inputs"]["backward"], horizon, dt)
    res = roadcalc.itinerary_delay(route, u_fw, u_bw, horizon=horizon, dt=dt)
    rows = []
    for i in range(2):
        for j in range(2):
            rows.append(
                [f"{i + 1}-{j + 1}",
                 _fmt(res["time_shift_steps"][i][j] * dt),
                 _fmt(res["raw"]["components_steps"][i][j] * dt),
                 _fmt(res["net"]["components_steps"][i][j] * dt)]
            )
    d1 = float(np.max(res["net"]["components_steps"][0])) * dt
    rows.append(["d_1", "", "", _fmt(d1)])
    return [(
        data["output"],
        ["pair", "time_shift_s", "delay_raw_s", "delay_net_s"],
        rows,
    )]


def run_carfollow_bench(data: dict, overrides: dict) -> list:
    law_cfg = data["law"]
    law = carfollow.saturating_law(
        a=float(law_cfg["slope_per_step"]),
        v_max=float(law_cfg["v_max_per_step"]),
        y_min=float(law_cfg.get("y_min_m", 0.0)),
    )
    bench = data["benchmark"]
    profile = carfollow.benchmark_leader_profile(
        steps=int(bench.get("steps", 1000)),
        cruise=float(bench.get("cruise_per_step", 12.0)),
        slow=float(bench.get("slow_per_step", 3.0)),
    )
    nu = int(bench.get("cars", 40))
    spacing = float(bench.get("spacing_m", 25.0))
    offset = float(bench.get("road_offset_m", 9000.0))
    lam = float(bench.get("discount", 0.0))
    x0 = carfollow.uniform_positions(nu, spacing) + offset
    rows = []
    for m in bench["leader_counts"]:
        traj = carfollow.simulate_open(
            carfollow.OpenScenario(nu, profile[-1]),
            carfollow.AnticipationConfig(int(m), lam),
            law,
            x0,
            profile,
        )
        met = carfollow.transient_metrics(traj)
        rows.append([int(m), _fmt(lam), _fmt(met["speed_variance"]), _fmt(met["accel_variance"])])
    return [(data["output"], ["m", "lambda", "speed_var", "accel_var"], rows)]


def run_validate_kind(data: dict, overrides: dict) -> list:
    from .validate import run_all

    seed = int(overrides.get("seed") or data.get("seed", 0))
    report = run_all(seed=seed, quick=bool(data.get("quick", False)))
    rows = [[r.name, r.cases, r.failures, "pass" if r.failures == 0 else "fail"] for r in report]
    out = data.get("output", "validation.csv")
    return [(out, ["family", "cases", "failures", "status"], rows)]


_RUNNERS = {
    "metro-phases": run_metro_phases,
    "metro-junction": run_metro_junction,
    "metro-demand-mp": run_metro_demand_mp,
    "metro-dp-surface": run_metro_dp_surface,
    "road-bounds": run_road_bounds,
    "road-itinerary": run_road_itinerary,
    "carfollow-bench": run_carfollow_bench,
    "validate": run_validate_kind,
}


def run_scenario(data: dict, overrides: dict | None = None) -> tuple[list, list[str]]:
    """Dispatch a parsed scenario.

    Returns (artifacts, warnings) where each artifact is a
    (filename, header, rows) triple.
    """
    overrides = overrides or {}
    runner = _RUNNERS[data["kind"]]
    results = runner(data, overrides)
    artifacts = [r for r in results if r[0] != "__warning__"]
    warnings = [r[2] for r in results if r[0] == "__warning__"]
    return artifacts, warnings

"""Max-plus metro-line analytics.

A line is discretized into segments; node j is the downstream end of
segment j (platform or not).  Two per-segment lower bounds drive everything:
the travel time t_j = r_j + w_j (run plus dwell) and the separation slack
s_j (safe-separation time minus run time).  Train departures then follow

    d_j^k = max( d_{j-1}^{k-b_j} + t_j ,  d_{j+1}^{k - (1-b_{j+1})} + s_{j+1} )

with indices modulo n, which is linear in the max-plus algebra.  The
asymptotic departure headway is the maximum cycle ratio of the associated
polynomial matrix, with the closed form

    h(m) = max( sum_j t_j / m ,  max_j (t_j + s_j) ,  sum_j s_j / (n - m) ).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLineError, SaturationError, ConfigError
from .maxplus import TROPICAL_ZERO, TropicalPolyMatrix

__all__ = [
    "LineConfig",
    "PhasePoint",
    "JunctionConfig",
    "DemandConfig",
    "build_line_polymatrix",
    "headway_closed_form",
    "phase_diagram",
    "junction_headway",
    "junction_surface",
    "demand_dependent_headway",
    "demand_equivalent_polymatrix",
    "dwell_run_laws",
    "line_from_stations",
    "line14_config",
    "random_line_config",
    "spread_trains",
]


@dataclass
class LineConfig:
    """Physical description of a looped metro line, one entry per segment."""

    run_s: np.ndarray          # minimum run time on segment j
    min_dwell_s: np.ndarray    # minimum dwell at node j (0 off-platform)
    min_sep_s: np.ndarray      # minimum separation slack s_j at segment j
    platform: np.ndarray       # bool, node j is a platform
    length_m: np.ndarray       # physical segment length
    trains_at: np.ndarray      # b_j in {0,1}, train on segment j at time 0

    def __post_init__(self):
        arrays = [self.run_s, self.min_dwell_s, self.min_sep_s, self.platform, self.length_m, self.trains_at]
        n = len(self.run_s)
        if any(len(a) != n for a in arrays):
            raise ConfigError("per-segment arrays must have equal length")
        if np.any(self.min_dwell_s[~self.platform] != 0):
            raise ConfigError("non-platform nodes must have zero minimum dwell")
        if np.any(self.platform & (self.min_dwell_s <= 0)):
            raise ConfigError("platform nodes must have positive minimum dwell")

    @property
    def n(self) -> int:
        return len(self.run_s)

    @property
    def m(self) -> int:
        return int(self.trains_at.sum())

    @property
    def total_length_m(self) -> float:
        return float(self.length_m.sum())

    @property
    def travel_lower_s(self) -> np.ndarray:
        """t_j = r_j + w_j lower bounds."""
        return self.run_s + self.min_dwell_s

    def with_trains(self, m: int) -> "LineConfig":
        """Copy with m trains spread (roughly) evenly over the segments."""
        return LineConfig(
            run_s=self.run_s.copy(),
            min_dwell_s=self.min_dwell_s.copy(),
            min_sep_s=self.min_sep_s.copy(),
            platform=self.platform.copy(),
            length_m=self.length_m.copy(),
            trains_at=spread_trains(self.n, m),
        )


def spread_trains(n: int, m: int) -> np.ndarray:
    """Indicator vector with m trains spread evenly over n segments."""
    if not 0 <= m <= n:
        raise ConfigError(f"cannot place {m} trains on {n} segments")
    b = np.zeros(n, dtype=int)
    if m:
        b[np.arange(m) * n // m] = 1
    return b


def build_line_polymatrix(cfg: LineConfig) -> TropicalPolyMatrix:
    """Degree-1 polynomial matrix of the departure dynamics.

    Row j holds t_j on column j-1 (duration b_j) and s_{j+1} on column j+1
    (duration 1 - b_{j+1}), indices modulo n.
    """
    n = cfg.n
    m = cfg.m
    if m == 0 or m == n:
        raise DegenerateLineError(f"m={m} with n={n}: headway is infinite")
    t = cfg.travel_lower_s
    s = cfg.min_sep_s
    b = cfg.trains_at
    coeffs = [np.full((n, n), TROPICAL_ZERO) for _ in range(2)]
    for j in range(n):
        prev = (j - 1) % n
        nxt = (j + 1) % n
        l_fw = int(b[j])
        coeffs[l_fw][j, prev] = max(coeffs[l_fw][j, prev], t[j])
        l_bw = 1 - int(b[nxt])
        coeffs[l_bw][j, nxt] = max(coeffs[l_bw][j, nxt], s[nxt])
    return TropicalPolyMatrix(coeffs)


def headway_closed_form(cfg: LineConfig, m: int | None = None) -> float:
    """Asymptotic average headway h(m); +inf when m is 0 or n."""
    m = cfg.m if m is None else m
    n = cfg.n
    if m <= 0 or m >= n:
        return math.inf
    t = cfg.travel_lower_s
    s = cfg.min_sep_s
    return max(
        float(t.sum()) / m,
        float(np.max(t + s)),
        float(s.sum()) / (n - m),
    )


@dataclass
class PhasePoint:
    """One row of the fundamental-diagram sweep."""

    m: int
    rho: float        # trains per metre
    h_s: float
    f_per_s: float
    w_s: float
    g_s: float
    phase: str

    @property
    def f_per_h(self) -> float:
        return self.f_per_s * 3600.0


def phase_diagram(cfg: LineConfig, m_range=None) -> list[PhasePoint]:
    """Headway/frequency/dwell/separation against train count.

    The frequency is the pointwise min of three branches in the density
    rho = m/L: v*rho, f_max, and w'*(rho_max - rho), with v = L/sum(t),
    f_max = 1/max(t_j + s_j) and w' = L/sum(s).
    """
    n = cfg.n
    big_l = cfg.total_length_m
    t = cfg.travel_lower_s
    s = cfg.min_sep_s
    tau = float(t.sum()) / big_l
    omega = float(s.sum()) / big_l
    v = 1.0 / tau
    wprime = 1.0 / omega
    h_min = float(np.max(t + s))
    f_max = 1.0 / h_min
    rho_max = n / big_l
    r_avg = float(cfg.run_s.sum()) / n

    if m_range is None:
        m_range = range(0, n + 1)
    points = []
    for m in m_range:
        rho = m / big_l
        h = headway_closed_form(cfg, m)
        f = 0.0 if math.isinf(h) else 1.0 / h
        if math.isinf(h):
            w = math.inf if m else 0.0
            g = math.inf
        else:
            w = (m / n) * h - r_avg
            g = h - w
        if rho <= f_max / v + 1e-12:
            phase = "free-flow"
        elif rho <= rho_max - f_max / wprime + 1e-12:
            phase = "max-frequency"
        else:
            phase = "congestion"
        points.append(PhasePoint(m=m, rho=rho, h_s=h, f_per_s=f, w_s=w, g_s=g, phase=phase))
    return points


# ---------------------------------------------------------------------------
# Junction (two branches joined to a central part, symmetric alternation)
# ---------------------------------------------------------------------------

@dataclass
class JunctionConfig:
    """Aggregates per part u (0 central, 1 and 2 branches)."""

    n_parts: tuple[int, int, int]          # segment counts n_0, n_1, n_2
    m_parts: tuple[int, int, int]          # train counts at time zero
    travel_sums: tuple[float, float, float]   # sum of t on each part
    sep_sums: tuple[float, float, float]      # sum of s on each part
    max_travel_plus_sep: tuple[float, float, float]  # max_j (t_j + s_j) per part

    @property
    def m(self) -> int:
        return sum(self.m_parts)

    @property
    def dm(self) -> int:
        return self.m_parts[2] - self.m_parts[1]


_JUNCTION_TERMS = ("fw_branch1", "fw_branch2", "min", "bw_branch1", "bw_branch2", "br_1", "br_2")


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else math.inf


def junction_headway(cfg: JunctionConfig) -> dict:
    """Average headways on the central part and branches, plus binding term.

    Returns h0 (central), h1 = h2 = 2*h0, f0 = max(0, min of reciprocals)
    and the label of the elementary term attaining the max (``infeasible``
    when every placement constraint makes h0 infinite).
    """
    n0, n1, n2 = cfg.n_parts
    m0, m1, m2 = cfg.m_parts
    t0, t1, t2 = cfg.travel_sums
    s0, s1, s2 = cfg.sep_sums
    mts0, mts1, mts2 = cfg.max_travel_plus_sep
    m = cfg.m
    dm = cfg.dm
    mbar0, mbar1, mbar2 = n0 - m0, n1 - m1, n2 - m2
    mbar = mbar0 + mbar1 + mbar2
    dmbar = mbar2 - mbar1

    if any(mp < 0 or mp > np_ for mp, np_ in zip(cfg.m_parts, cfg.n_parts)):
        terms = {name: math.inf for name in _JUNCTION_TERMS}
        return {
            "h0": math.inf, "h1": math.inf, "h2": math.inf,
            "f0": 0.0, "binding": "infeasible", "terms": terms,
        }

    terms = {
        "fw_branch1": _safe_div(t0 + t1, m - dm),
        "fw_branch2": _safe_div(t0 + t2, m + dm),
        "min": max(mts0, mts1 / 2.0, mts2 / 2.0),
        "bw_branch1": _safe_div(s0 + s1, mbar - dmbar),
        "bw_branch2": _safe_div(s0 + s2, mbar + dmbar),
        "br_1": _safe_div(t1 + s2, 2.0 * (n2 - dm)),
        "br_2": _safe_div(s1 + t2, 2.0 * (n1 + dm)),
    }
    h0 = max(terms.values())
    if math.isinf(h0):
        binding = "infeasible"
        f0 = 0.0
    else:
        binding = next(name for name in _JUNCTION_TERMS if terms[name] == h0)
        f0 = max(0.0, min(1.0 / val if val > 0 else math.inf for val in terms.values()))
    return {
        "h0": h0, "h1": 2.0 * h0, "h2": 2.0 * h0,
        "f0": f0, "binding": binding, "terms": terms,
    }


def junction_surface(cfg_factory, m_values, dm_values) -> list[dict]:
    """Evaluate junction_headway over an (m, dm) grid.

    ``cfg_factory(m, dm)`` must return a JunctionConfig (or None for grid
    points with no integral train placement).
    """
    rows = []
    for m in m_values:
        for dm in dm_values:
            cfg = cfg_factory(m, dm)
            if cfg is None:
                continue
            res = junction_headway(cfg)
            res.update({"m": m, "dm": dm})
            rows.append(res)
    return rows


# ---------------------------------------------------------------------------
# Demand-dependent dwell/run control (max-plus equivalent regime)
# ---------------------------------------------------------------------------

@dataclass
class DemandConfig:
    """Passenger-demand data per node (zeros on non-platforms)."""

    lam_in: np.ndarray       # boarding arrivals, passengers/s
    lam_out: np.ndarray      # alighting arrivals, passengers/s
    alpha_in: np.ndarray     # door upload rate, passengers/s
    alpha_out: np.ndarray    # door download rate, passengers/s
    run_nominal_s: np.ndarray  # nominal run times r~_j
    run_min_s: np.ndarray      # hard minimum run times
    g_min_s: np.ndarray        # minimum safe separation at node j
    g_max_s: np.ndarray        # maximum tolerated separation at node j

    def __post_init__(self):
        x = self.demand_fraction()
        if np.any(x >= 1.0):
            raise SaturationError("x_j >= 1: demand exceeds door capacity")

    def demand_fraction(self) -> np.ndarray:
        """x_j = lam_out/alpha_out + lam_in/alpha_in, 0 where rates are 0."""
        x = np.zeros_like(self.lam_in, dtype=float)
        mask_out = self.alpha_out > 0
        x[mask_out] += self.lam_out[mask_out] / self.alpha_out[mask_out]
        mask_in = self.alpha_in > 0
        x[mask_in] += self.lam_in[mask_in] / self.alpha_in[mask_in]
        return x

    def demand_ratio(self) -> np.ndarray:
        """X_j = x_j / (1 - x_j)."""
        x = self.demand_fraction()
        return x / (1.0 - x)


def demand_dependent_headway(cfg: LineConfig, demand: DemandConfig, m: int) -> dict:
    """Headway/frequency under demand-coupled dwell and run control.

    h(m, X) = max( sum_j (g_min_j X_j + r~_j)/m ,
                   max_j ((g_min_j X_j + r~_j) + s_j) ,
                   sum_j s_j / (n - m) )

    ``conditions_ok`` reports whether the run-time margins absorb the
    demand-driven dwell extensions (margin condition dr_j >= X_j dg_j) so
    the controlled dynamics collapse to this max-plus linear form.
    """
    n = cfg.n
    if m <= 0 or m >= n:
        return {"h": math.inf, "f": 0.0, "conditions_ok": False,
                "initial_headway_bound_s": np.full(n, math.inf)}
    bigx = demand.demand_ratio()
    x = demand.demand_fraction()
    fw = demand.g_min_s * bigx + demand.run_nominal_s
    s = cfg.min_sep_s
    h = max(float(fw.sum()) / m, float(np.max(fw + s)), float(s.sum()) / (n - m))
    dr = demand.run_nominal_s - demand.run_min_s
    dg = demand.g_max_s - demand.g_min_s
    margin_ok = bool(np.all(dr >= bigx * dg - 1e-12))
    h_bar = np.where(x < 1.0, demand.g_max_s / np.maximum(1.0 - x, 1e-15), math.inf)
    return {
        "h": h,
        "f": 1.0 / h,
        "conditions_ok": margin_ok,
        "initial_headway_bound_s": h_bar,
    }


def demand_equivalent_polymatrix(cfg: LineConfig, demand: DemandConfig) -> TropicalPolyMatrix:
    """Max-plus matrix of the demand-equivalent system (forward weights
    g_min_j X_j + r~_j, backward weights s_{j+1})."""
    fw = demand.g_min_s * demand.demand_ratio() + demand.run_nominal_s
    eq_cfg = LineConfig(
        run_s=fw.copy(),
        min_dwell_s=np.zeros(cfg.n),
        min_sep_s=cfg.min_sep_s.copy(),
        platform=np.zeros(cfg.n, dtype=bool),
        length_m=cfg.length_m.copy(),
        trains_at=cfg.trains_at.copy(),
    )
    return build_line_polymatrix(eq_cfg)


def dwell_run_laws(h_s: float, x: float, *, w_max_s: float, r_min_s: float,
                   r_nominal_s: float, h_min_s: float) -> dict:
    """Demand-driven dwell and run times at one platform.

    w = min(x*h, w_max); r = max(r_min, r_nominal - x*(h - h_min)); t = r + w.
    """
    w = min(x * h_s, w_max_s)
    r = max(r_min_s, r_nominal_s - x * (h_s - h_min_s))
    return {"w": w, "r": r, "t": r + w}


# ---------------------------------------------------------------------------
# Line builders
# ---------------------------------------------------------------------------

def line_from_stations(
    inter_station_m: list[float],
    *,
    v_run: float,
    min_dwell_s: float,
    min_sep_s: float,
    segment_target_m: float = 200.0,
    turnaround_run_s: list[float] = (),
    turnaround_length_m: float = 0.0,
    trains: int = 1,
) -> LineConfig:
    """Loop a linear line: both directions plus a turnaround at each end.

    Each inter-station is split into round(length/segment_target) equal
    segments run at v_run; the last segment of each inter-station ends at a
    platform.  The turnaround chain closes each end of the loop; its final
    block ends at the departure platform of the opposite direction.
    """
    if not inter_station_m:
        raise ConfigError("need at least one inter-station length")

    seg_run: list[float] = []
    seg_len: list[float] = []
    seg_platform: list[bool] = []
    seg_dwell: list[float] = []

    def add_direction(lengths):
        for dist in lengths:
            k = max(1, round(dist / segment_target_m))
            piece = dist / k
            for i in range(k):
                seg_len.append(piece)
                seg_run.append(piece / v_run)
                at_platform = i == k - 1
                seg_platform.append(at_platform)
                seg_dwell.append(min_dwell_s if at_platform else 0.0)

    def add_turnaround():
        if not turnaround_run_s:
            return
        blocks = list(turnaround_run_s)
        piece = turnaround_length_m / len(blocks) if blocks else 0.0
        for i, run in enumerate(blocks):
            seg_len.append(piece)
            seg_run.append(run)
            last = i == len(blocks) - 1
            seg_platform.append(last)
            seg_dwell.append(min_dwell_s if last else 0.0)

    # forward direction ends at terminus B platform, then turnaround B,
    # reverse direction, turnaround A back to the start platform
    add_direction(inter_station_m)
    add_turnaround()
    add_direction(list(reversed(inter_station_m)))
    add_turnaround()

    n = len(seg_run)
    cfg = LineConfig(
        run_s=np.array(seg_run),
        min_dwell_s=np.array(seg_dwell),
        min_sep_s=np.full(n, float(min_sep_s)),
        platform=np.array(seg_platform),
        length_m=np.array(seg_len),
        trains_at=spread_trains(n, trains),
    )
    return cfg


# Paris line 14 style configuration: 9 stations, published inter-station
# lengths, 22 m/s free run, 20 s dwell, 30 s separation.  The terminus
# turnaround (410 m of non-revenue track for the whole line) is modelled as
# five blocks per end timed (42, 42, 42, 42, 22) s, the final block ending
# at the departure platform; block times are terminus manoeuvre times, not
# length/speed.
LINE14_INTER_STATION_M = [618.0, 712.0, 1359.0, 2499.0, 624.0, 970.0, 947.0, 713.0]
LINE14_TURNAROUND_RUN_S = [42.0, 42.0, 42.0, 42.0, 22.0]


def line14_config(trains: int = 21) -> LineConfig:
    return line_from_stations(
        LINE14_INTER_STATION_M,
        v_run=22.0,
        min_dwell_s=20.0,
        min_sep_s=30.0,
        segment_target_m=200.0,
        turnaround_run_s=LINE14_TURNAROUND_RUN_S,
        turnaround_length_m=205.0,
        trains=trains,
    )


def random_line_config(rng: np.random.Generator, max_segments: int = 40) -> LineConfig:
    """Seeded random line with times in [1, 100] (test corpus generator)."""
    n = int(rng.integers(2, max_segments + 1))
    m = int(rng.integers(1, n))
    platform = rng.random(n) < 0.4
    run = rng.uniform(1.0, 100.0, n)
    dwell = np.where(platform, rng.uniform(1.0, 100.0, n), 0.0)
    sep = rng.uniform(1.0, 100.0, n)
    b = np.zeros(n, dtype=int)
    b[rng.choice(n, size=m, replace=False)] = 1
    return LineConfig(
        run_s=run,
        min_dwell_s=dwell,
        min_sep_s=sep,
        platform=platform,
        length_m=run * 10.0,
        trains_at=b,
    )

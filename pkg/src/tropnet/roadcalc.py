"""Road-traffic network calculus on cell-transmission dynamics.

A road section is a two-input two-output min-plus system: forward demand
and backward supply come in, forward outflow and backward supply to the
upstream neighbour go out.  The cumulated outflow obeys

    Q(t) = min( U_fw(t - L/v) + n ,  Q(t - L/v) + q_max L/v ,  U_bw(t) )

whose exact resolution yields a service matrix beta with Y >= beta * U.
Sections compose by concatenation (two-directional coupling through a
sub-additive closure) and by feedback (closed rings); a signal-controlled
section shifts the demand path by the red time and scales the capacity by
the green share.

Discretization: the latencies L/v, L/w and the red time are rounded UP to
whole steps, and the capacity-window gain is scaled to the rounded window
(q_max * window), keeping the long-run rate exact.  The simulator iterates
the same rounded recursion, so every service matrix here is exact for the
simulated dynamics, and bounds stay conservative for any faster road.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curves import (
    Curve,
    CurveMatrix,
    arrival_matrix,
    closure,
    cmin,
    conv,
    eps_curve,
    gain_shift_closure,
    gain_shift_curve,
    matrix_closure,
    mimo_delay_bound,
    unit_curve,
)
from .errors import CausalityError, ConfigError, GeometryError

__all__ = [
    "RoadSectionParams",
    "TrafficLightParams",
    "section_service_matrix",
    "controlled_section_service",
    "concatenate",
    "feedback",
    "cell_transmission_simulate",
    "ring_simulate",
    "itinerary_service_matrix",
    "itinerary_delay",
    "rate_latency_extraction",
    "default_horizon",
]


@dataclass
class RoadSectionParams:
    """Trapezoidal-fundamental-diagram section parameters (SI units)."""

    length_m: float
    free_speed: float       # v, m/s
    wave_speed: float       # w', m/s (backward)
    capacity: float         # q_max, veh/s
    n_max: float            # max vehicles in the section
    n0: float               # vehicles present at time zero

    def __post_init__(self):
        if min(self.length_m, self.free_speed, self.wave_speed, self.capacity) <= 0:
            raise ConfigError("length, speeds and capacity must be positive")
        if not 0 <= self.n0 <= self.n_max:
            raise ConfigError("initial occupancy outside [0, n_max]")
        rho_j = self.n_max / self.length_m
        if rho_j + 1e-12 < self.capacity / self.free_speed + self.capacity / self.wave_speed:
            raise GeometryError("jam density below trapezoid requirement q/v + q/w")

    @property
    def n_free(self) -> float:
        return self.n_max - self.n0

    @property
    def fw_lag_s(self) -> float:
        return self.length_m / self.free_speed

    @property
    def bw_lag_s(self) -> float:
        return self.length_m / self.wave_speed


@dataclass
class TrafficLightParams:
    """Fixed-cycle signal: cycle = green + red."""

    cycle_s: float
    green_s: float
    red_s: float

    def __post_init__(self):
        if self.green_s < 0 or self.red_s < 0:
            raise ConfigError("green and red must be nonnegative")
        if abs(self.cycle_s - self.green_s - self.red_s) > 1e-9:
            raise ConfigError("cycle must equal green + red")

    @property
    def green_share(self) -> float:
        return self.green_s / self.cycle_s if self.cycle_s > 0 else 1.0


def steps_up(seconds: float, dt: float) -> int:
    return max(0, int(math.ceil(seconds / dt - 1e-9)))


def default_horizon(sections, dt: float, factor: int = 4) -> int:
    """factor x the total forward+backward latency of the scenario."""
    total = 0.0
    for sec in sections:
        p = sec[0] if isinstance(sec, tuple) else sec
        tl = sec[1] if isinstance(sec, tuple) else None
        total += p.fw_lag_s + p.bw_lag_s + (tl.red_s if tl else 0.0)
    return max(16, factor * steps_up(total, dt))


def _section_atoms(p: RoadSectionParams, dt: float, horizon: int, *,
                   green_share: float = 1.0, red_s: float = 0.0):
    a = max(1, steps_up(p.fw_lag_s, dt))
    b = max(1, steps_up(p.bw_lag_s, dt))
    r = steps_up(red_s, dt)
    cap_gain = green_share * p.capacity * a * dt
    star = gain_shift_closure(cap_gain, a * dt, horizon, dt)
    cb = CurveMatrix(
        [
            [gain_shift_curve(p.n0, a + r, horizon, dt), unit_curve(horizon, dt)],
            [
                gain_shift_curve(p.n0 + p.n_free, a + r + b, horizon, dt),
                gain_shift_curve(p.n_free, b, horizon, dt),
            ],
        ]
    )
    return star, cb


def section_service_matrix(p: RoadSectionParams, horizon: int, dt: float = 1.0) -> CurveMatrix:
    """Exact service matrix e + A** (C B) of a free section on the grid."""
    star, cb = _section_atoms(p, dt, horizon)
    return CurveMatrix.identity(2, horizon, dt) + cb.scale(star)


def controlled_section_service(
    p: RoadSectionParams, tl: TrafficLightParams, horizon: int, dt: float = 1.0
) -> CurveMatrix:
    """Service matrix of a signal-controlled section.

    The demand path gains the red time as extra latency and the capacity
    window scales by the green share; with zero red and full green this is
    the free-section matrix.
    """
    star, cb = _section_atoms(
        p, dt, horizon, green_share=tl.green_share, red_s=tl.red_s
    )
    return CurveMatrix.identity(2, horizon, dt) + cb.scale(star)


def concatenate(b1: CurveMatrix, b2: CurveMatrix) -> CurveMatrix:
    """Two-directional composition of 2x2 service matrices.

    System 2 sits downstream of system 1; the coupling loop (backward wave
    of 2 feeding the forward path of 1) is resolved by the closure of
    b2_21 * b1_12.
    """
    if b1.shape != (2, 2) or b2.shape != (2, 2):
        raise ConfigError("concatenation expects 2x2 service matrices")
    k = conv(b2[1, 0], b1[0, 1])
    kstar = closure(k)
    loop_in = conv(b2[1, 0], b1[0, 0])      # forward in, bounced back at system 2
    beta11 = cmin(
        conv(b2[0, 0], b1[0, 0]),
        conv(conv(conv(b2[0, 0], b1[0, 1]), kstar), loop_in),
    )
    beta12 = cmin(
        conv(conv(conv(b2[0, 0], b1[0, 1]), kstar), b2[1, 1]),
        b2[0, 1],
    )
    beta21 = cmin(
        b1[1, 0],
        conv(conv(b1[1, 1], kstar), loop_in),
    )
    beta22 = conv(conv(b1[1, 1], kstar), b2[1, 1])
    return CurveMatrix([[beta11, beta12], [beta21, beta22]])


def feedback(b: CurveMatrix) -> CurveMatrix:
    """Service matrix b* b of the system with outputs folded onto inputs."""
    if b.shape[0] != b.shape[1]:
        raise ConfigError("feedback expects a square matrix")
    return matrix_closure(b) @ b


# ---------------------------------------------------------------------------
# Cell-transmission reference simulator
# ---------------------------------------------------------------------------

def _check_causal(u: Curve):
    if u.samples[0] != 0.0:
        raise CausalityError("cumulative inputs must start at zero")


def cell_transmission_simulate(
    sections,
    u_fw: Curve,
    u_bw: Curve,
    t_steps: int | None = None,
    dt: float | None = None,
) -> tuple[Curve, Curve]:
    """Exact iteration of the (rounded) cell-transmission recursion.

    ``sections`` is a RoadSectionParams, a list of them, or a list of
    (RoadSectionParams, TrafficLightParams-or-None) pairs forming a chain.
    Returns the chain's forward outflow and the backward supply offered to
    the upstream neighbour of the first section.
    """
    if isinstance(sections, RoadSectionParams):
        sections = [sections]
    chain: list[tuple[RoadSectionParams, TrafficLightParams | None]] = [
        sec if isinstance(sec, tuple) else (sec, None) for sec in sections
    ]
    dt = u_fw.time_step if dt is None else dt
    _check_causal(u_fw)
    _check_causal(u_bw)
    t_steps = min(u_fw.horizon, u_bw.horizon) if t_steps is None else t_steps

    n_sec = len(chain)
    a = [max(1, steps_up(p.fw_lag_s, dt)) for p, _ in chain]
    b = [max(1, steps_up(p.bw_lag_s, dt)) for p, _ in chain]
    r = [steps_up(tl.red_s, dt) if tl else 0 for _, tl in chain]
    cap = [
        (tl.green_share if tl else 1.0) * p.capacity * a[i] * dt
        for i, (p, tl) in enumerate(chain)
    ]
    n0 = [p.n0 for p, _ in chain]
    nf = [p.n_free for p, _ in chain]

    ufw = u_fw.extended(t_steps)
    ubw = u_bw.extended(t_steps)
    q = np.zeros((n_sec, t_steps + 1))

    def demand(i: int, t: int) -> float:
        # cumulated arrivals at section i's entrance by time t
        if t < 0:
            return 0.0
        return ufw[t] if i == 0 else q[i - 1, t]

    for t in range(1, t_steps + 1):
        for i in range(n_sec):
            lag = t - a[i] - r[i]
            term_demand = demand(i, lag) + n0[i]
            prev = q[i, t - a[i]] if t - a[i] >= 0 else 0.0
            term_cap = prev + cap[i]
            if i + 1 < n_sec:
                tb = t - b[i + 1]
                term_supply = nf[i + 1] + (q[i + 1, tb] if tb >= 0 else 0.0)
            else:
                term_supply = ubw[t]
            q[i, t] = min(term_demand, term_cap, term_supply)

    y_fw = Curve(q[n_sec - 1], u_fw.finite_tail_rate(), dt)
    first_b = b[0]
    y_bw_samples = np.empty(t_steps + 1)
    y_bw_samples[0] = 0.0
    for t in range(1, t_steps + 1):
        tb = t - first_b
        y_bw_samples[t] = nf[0] + (q[0, tb] if tb >= 0 else 0.0)
    y_bw = Curve(y_bw_samples, u_bw.finite_tail_rate(), dt)
    return y_fw, y_bw


def ring_simulate(
    p: RoadSectionParams,
    u_fw: Curve,
    u_bw: Curve,
    t_steps: int | None = None,
) -> tuple[Curve, Curve]:
    """One section closed on itself: inputs are merged with its own outputs."""
    dt = u_fw.time_step
    _check_causal(u_fw)
    _check_causal(u_bw)
    t_steps = min(u_fw.horizon, u_bw.horizon) if t_steps is None else t_steps
    a = max(1, steps_up(p.fw_lag_s, dt))
    b = max(1, steps_up(p.bw_lag_s, dt))
    cap = p.capacity * a * dt
    ufw = u_fw.extended(t_steps)
    ubw = u_bw.extended(t_steps)
    q = np.zeros(t_steps + 1)
    for t in range(1, t_steps + 1):
        qa = q[t - a] if t - a >= 0 else 0.0
        qb = q[t - b] if t - b >= 0 else 0.0
        fw_in = min(ufw[t - a] if t - a >= 0 else 0.0, qa)
        supply = min(ubw[t], p.n_free + qb)
        q[t] = min(fw_in + p.n0, qa + cap, supply)
    y_fw = Curve(q, measure_rate(q), dt)
    y_bw_samples = np.array(
        [0.0] + [p.n_free + (q[t - b] if t - b >= 0 else 0.0) for t in range(1, t_steps + 1)]
    )
    y_bw = Curve(y_bw_samples, measure_rate(y_bw_samples), dt)
    return y_fw, y_bw


def measure_rate(samples: np.ndarray) -> float:
    h = len(samples) - 1
    w = max(1, h // 4)
    return float((samples[h] - samples[h - w]) / w)


# ---------------------------------------------------------------------------
# Itineraries
# ---------------------------------------------------------------------------

def itinerary_service_matrix(route, horizon: int, dt: float = 1.0) -> CurveMatrix:
    """Chained service matrix of a route of (section, optional signal)."""
    beta = None
    for item in route:
        p, tl = item if isinstance(item, tuple) else (item, None)
        mat = (
            controlled_section_service(p, tl, horizon, dt)
            if tl
            else section_service_matrix(p, horizon, dt)
        )
        beta = mat if beta is None else concatenate(beta, mat)
    if beta is None:
        raise ConfigError("route must contain at least one section")
    return beta


def itinerary_delay(
    route,
    u_fw: Curve,
    u_bw: Curve,
    horizon: int | None = None,
    dt: float | None = None,
) -> dict:
    """Forward travel-time bound for a route under the given input pair.

    Builds the chained service matrix, estimates the arrival matrix of the
    inputs, and applies the MIMO delay bound.  Two variants are reported:
    ``raw`` uses the inputs as-is (initial vehicles counted as served
    backlog), ``net`` offsets each flow by the vehicles/spaces initially in
    the route, which tightens the bound to newly arriving traffic.
    """
    dt = u_fw.time_step if dt is None else dt
    pairs = [item if isinstance(item, tuple) else (item, None) for item in route]
    if horizon is None:
        horizon = default_horizon(pairs, dt)
    beta = itinerary_service_matrix(pairs, horizon, dt)
    alpha, t_mat = arrival_matrix([u_fw, u_bw])
    raw = mimo_delay_bound(alpha, t_mat, beta)

    total_n = sum(p.n0 for p, _ in pairs)
    total_free = sum(p.n_free for p, _ in pairs)
    shifted = [_offset_flow(u_fw, total_n), _offset_flow(u_bw, total_free)]
    alpha2, t2 = arrival_matrix(shifted)
    net = mimo_delay_bound(alpha2, t2, beta)

    return {
        "beta": beta,
        "time_shift_steps": t_mat,
        "raw": raw,
        "net": net,
        "delay_s": raw["delay_s"],
        "components_s": raw["components_steps"] * dt,
    }


def _offset_flow(u: Curve, amount: float) -> Curve:
    samples = u.samples.copy()
    samples[1:] = samples[1:] + amount
    return Curve(samples, u.tail_rate, u.time_step)


def rate_latency_extraction(curve: Curve) -> dict:
    """(offset, latency, rate) parameters read off a gridded service entry.

    The offset is the first value after t = 0, the latency the last time
    the curve still sits at that offset, the rate the mean slope from there
    to the horizon.
    """
    s = curve.samples
    h = curve.horizon
    if h < 2:
        raise ConfigError("curve too short for extraction")
    offset = float(s[1])
    latency_idx = 1
    for t in range(1, h + 1):
        if s[t] <= offset + 1e-9:
            latency_idx = t
        else:
            break
    span = h - latency_idx
    rate = float((s[h] - s[latency_idx]) / span) if span > 0 else 0.0
    return {
        "offset": offset,
        "latency_steps": latency_idx,
        "latency_s": latency_idx * curve.time_step,
        "rate_per_s": rate / curve.time_step,
    }

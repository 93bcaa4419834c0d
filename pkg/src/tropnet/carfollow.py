"""Piecewise-linear car-following with multi-leader anticipation.

The behaviour law V(y) = min_u max_w (alpha_uw y + beta_uw) maps the gap to
the equilibrium speed.  With anticipation over m leaders the update is

    x_n(t+1) = x_n(t) + min_{j<=m} (1+lam)^{j-1} min_u max_w
                   ( alpha_uw (x_{n-j} - x_n)/j + beta_uw )

which is a min-max dynamic-programming system with substochastic rows when
alpha_{juw}/j stays in [0, 1].  Stationary regimes are uniform platoons:
on a ring the asymptotic speed is the behaviour law at the mean gap, on an
open road the mean gap is the reverse law at the leader speed; both are
certified by substitution residuals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dpsolve import DPDynamics, Trajectory, iterate
from .errors import ConfigError, ConvergenceError, RangeError, StabilityError

__all__ = [
    "BehaviorLaw",
    "AnticipationConfig",
    "RingScenario",
    "OpenScenario",
    "speed_law",
    "reverse_speed_law",
    "build_dynamics",
    "stationary_ring",
    "stationary_open",
    "simulate_open",
    "transient_metrics",
    "saturating_law",
    "benchmark_leader_profile",
]


@dataclass
class BehaviorLaw:
    """Gap-to-speed pieces: speed = min_u max_w (alpha[u,w] * gap + beta[u,w]).

    Units are distance per time step; alpha is per-step and must stay in
    [0, 1] for the dynamics to be nonexpansive.
    """

    alpha: np.ndarray    # (U, W)
    beta: np.ndarray     # (U, W)

    def __post_init__(self):
        self.alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        if self.alpha.shape != self.beta.shape:
            raise ConfigError("alpha and beta must share shape (U, W)")
        if np.any(self.alpha < 0) or np.any(self.alpha > 1):
            raise StabilityError("law slopes must lie in [0, 1]")

    @property
    def n_u(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_w(self) -> int:
        return self.alpha.shape[1]


def saturating_law(a: float, v_max: float, y_min: float = 0.0) -> BehaviorLaw:
    """min(v_max, a*(y - y_min)) as a two-piece law."""
    alpha = np.array([[a], [0.0]])
    beta = np.array([[-a * y_min], [v_max]])
    return BehaviorLaw(alpha=alpha, beta=beta)


def speed_law(gap: float, law: BehaviorLaw) -> float:
    vals = law.alpha * gap + law.beta
    return float(vals.max(axis=1).min())


def reverse_speed_law(v: float, law: BehaviorLaw) -> float:
    """Smallest gap at which the law yields speed v.

    gap = max_u min_w (v - beta_uw)/alpha_uw; pieces with zero slope do not
    constrain when already satisfied (v <= beta) and make v unreachable
    otherwise.
    """
    best = -np.inf
    for u in range(law.n_u):
        worst = np.inf
        for w in range(law.n_w):
            a, b = law.alpha[u, w], law.beta[u, w]
            if a > 0:
                worst = min(worst, (v - b) / a)
            elif v > b + 1e-12:
                raise RangeError(f"speed {v} exceeds the law's cap {b}")
        if worst < np.inf:
            best = max(best, worst)
    if not np.isfinite(best):
        raise RangeError("law has no gap-dependent piece")
    return float(best)


@dataclass
class AnticipationConfig:
    """Leader count and the per-leader discount (1+lam)^(j-1)."""

    leaders: int = 1
    discount: float = 0.0

    def __post_init__(self):
        if self.leaders < 1:
            raise ConfigError("need at least one leader")
        if self.discount < 0:
            raise ConfigError("discount must be nonnegative")

    def scaled_law(self, law: BehaviorLaw, j: int) -> tuple[np.ndarray, np.ndarray]:
        f = (1.0 + self.discount) ** (j - 1)
        return f * law.alpha, f * law.beta


@dataclass
class RingScenario:
    cars: int
    mean_gap: float

    def __post_init__(self):
        if self.cars < 2:
            raise ConfigError("need at least two cars")
        if self.mean_gap <= 0:
            raise ConfigError("mean gap must be positive")

    @property
    def road_length(self) -> float:
        return self.cars * self.mean_gap


@dataclass
class OpenScenario:
    cars: int
    leader_speed: float           # asymptotic speed of car 0

    def __post_init__(self):
        if self.cars < 2:
            raise ConfigError("need at least two cars")


def _check_stability(law: BehaviorLaw, anticip: AnticipationConfig):
    for j in range(1, anticip.leaders + 1):
        alpha_j, _ = anticip.scaled_law(law, j)
        if np.any(alpha_j / j > 1.0 + 1e-12):
            raise StabilityError(
                f"alpha_(j={j})/j leaves [0, 1]; reduce slope or discount"
            )


def build_dynamics(
    scenario, anticip: AnticipationConfig, law: BehaviorLaw
) -> DPDynamics:
    """Min-max system over branches z = (leader index j, piece u)."""
    _check_stability(law, anticip)
    nu = scenario.cars
    ring = isinstance(scenario, RingScenario)
    z_count = anticip.leaders * law.n_u
    m = np.zeros((z_count, law.n_w, nu, nu))
    c = np.zeros((z_count, law.n_w, nu))

    for j in range(1, anticip.leaders + 1):
        alpha_j, beta_j = anticip.scaled_law(law, j)
        for u in range(law.n_u):
            z = (j - 1) * law.n_u + u
            for w in range(law.n_w):
                coeff = alpha_j[u, w] / j
                for i in range(nu):
                    if ring:
                        lead = (i - j) % nu
                        m[z, w, i, i] = 1.0 - coeff
                        m[z, w, i, lead] += coeff
                        c[z, w, i] = beta_j[u, w]
                        if i < j:
                            c[z, w, i] += coeff * scenario.road_length
                    else:
                        if i == 0:
                            m[z, w, i, i] = 1.0
                            c[z, w, i] = scenario.leader_speed
                        elif i < j:
                            m[z, w, i, i] = 1.0
                            c[z, w, i] = np.inf
                        else:
                            m[z, w, i, i] = 1.0 - coeff
                            m[z, w, i, i - j] = coeff
                            c[z, w, i] = beta_j[u, w]
    return DPDynamics(sense="minmax", m_mats=m, c_vecs=c)


def uniform_positions(nu: int, gap: float) -> np.ndarray:
    """Platoon positions [(nu-1) gap, ..., gap, 0] (car 0 leads)."""
    return gap * np.arange(nu - 1, -1, -1, dtype=float)


def stationary_ring(
    scenario: RingScenario, anticip: AnticipationConfig, law: BehaviorLaw,
    residual_tol: float = 1e-9,
) -> dict:
    """Uniform stationary regime on the ring, certified by substitution.

    The asymptotic speed is the behaviour law at the mean gap and does not
    depend on the anticipation horizon.
    """
    _check_stability(law, anticip)
    v_bar = speed_law(scenario.mean_gap, law)
    x = uniform_positions(scenario.cars, scenario.mean_gap)
    dyn = build_dynamics(scenario, anticip, law)
    step = iterate(dyn, x, 1).states[1]
    residual = float(np.max(np.abs(step - (x + v_bar))))
    if residual > residual_tol:
        raise ConvergenceError(f"stationary substitution residual {residual:.2e}")
    return {"v_bar": v_bar, "positions": x, "residual": residual}


def stationary_open(
    v_leader: float, anticip: AnticipationConfig, law: BehaviorLaw,
    cars: int = 5, residual_tol: float = 1e-9,
) -> dict:
    """Uniform stationary regime behind a constant-speed leader."""
    _check_stability(law, anticip)
    gap = reverse_speed_law(v_leader, law)
    scenario = OpenScenario(cars=cars, leader_speed=v_leader)
    x = uniform_positions(cars, gap)
    dyn = build_dynamics(scenario, anticip, law)
    step = iterate(dyn, x, 1).states[1]
    residual = float(np.max(np.abs(step - (x + v_leader))))
    if residual > residual_tol:
        raise ConvergenceError(f"stationary substitution residual {residual:.2e}")
    # the nearest-leader branch attains the min at the stationary point
    vals_j1 = []
    for u in range(law.n_u):
        vals_j1.append((law.alpha[u] * gap + law.beta[u]).max())
    assert min(vals_j1) <= v_leader + 1e-9
    return {"gap": gap, "positions": x, "residual": residual}


def simulate_open(
    scenario: OpenScenario,
    anticip: AnticipationConfig,
    law: BehaviorLaw,
    x0: np.ndarray,
    leader_speeds: np.ndarray,
) -> Trajectory:
    """Open-road run with a time-varying leader speed profile."""
    _check_stability(law, anticip)
    dyn = build_dynamics(scenario, anticip, law)
    nu = scenario.cars
    k_steps = len(leader_speeds)
    states = np.empty((k_steps + 1, nu))
    labels = np.empty((k_steps, nu, 2), dtype=int)
    states[0] = np.asarray(x0, dtype=float)
    x = states[0]
    m = dyn.m_mats
    c = dyn.c_vecs.copy()
    for k in range(k_steps):
        c[:, :, 0] = leader_speeds[k]
        vals = np.einsum("zwij,j->zwi", m, x) + c
        inner = vals.max(axis=1)
        w_lab = vals.argmax(axis=1)
        z_lab = inner.argmin(axis=0)
        x = inner.min(axis=0)
        labels[k, :, 0] = z_lab
        labels[k, :, 1] = w_lab[z_lab, np.arange(nu)]
        states[k + 1] = x
    return Trajectory(states=states, labels=labels)


def transient_metrics(traj: Trajectory) -> dict:
    """Cross-car speed and acceleration variance, averaged over the run."""
    speeds = np.diff(traj.states, axis=0)
    accels = np.diff(speeds, axis=0)
    return {
        "speed_variance": float(np.mean(np.var(speeds, axis=1))),
        "accel_variance": float(np.mean(np.var(accels, axis=1))),
    }


def benchmark_leader_profile(steps: int = 1000, cruise: float = 12.0,
                             slow: float = 3.0) -> np.ndarray:
    """Piecewise-constant leader speed with two slowdown episodes
    (distance per step; default scale matches a half-second step)."""
    v = np.full(steps, cruise)
    v[100:160] = slow
    v[500:560] = slow
    return v

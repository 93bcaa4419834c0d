"""Additive 1-homogeneous monotone dynamic systems.

Covers three recursion shapes on a state vector x in R^n:

  max sense      x_i^k = max_u ( [M^u x^{k-1}]_i + [N^u x^k]_i + c^u_i )
  min sense      same with min
  minmax sense   x_i^k = min_z max_w ( [M^{zw} x^{k-1}]_i + c^{zw}_i )

Nonnegative coefficient rows summing to one make each map additively
homogeneous, monotone, hence nonexpansive; the implicit part N is resolved
within a step in topological order of its support (triangular systems).
Rows where c is -inf (max) or +inf (min) mark actions absent at that
component.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ImplicitCycleError, StructureError
from .maxplus import Arc, PrecedenceGraph, graph_strongly_connected

__all__ = [
    "DPDynamics",
    "Trajectory",
    "check_structure",
    "triangular_order",
    "iterate",
    "growth_rate",
    "full_span_growth",
    "map_graph",
    "is_strongly_connected",
    "trajectory_to_csv",
]


@dataclass
class DPDynamics:
    """Coefficient families of a min/max/minmax dynamic-programming system.

    For senses "max"/"min": m_mats, n_mats have shape (A, n, n) and c_vecs
    (A, n).  For "minmax": shapes (Z, W, n, n) and (Z, W, n); the implicit
    part must be absent.
    """

    sense: str
    m_mats: np.ndarray
    c_vecs: np.ndarray
    n_mats: np.ndarray | None = None

    def __post_init__(self):
        if self.sense not in ("max", "min", "minmax"):
            raise ValueError(f"unknown sense {self.sense!r}")
        self.m_mats = np.asarray(self.m_mats, dtype=float)
        self.c_vecs = np.asarray(self.c_vecs, dtype=float)
        if self.n_mats is not None:
            self.n_mats = np.asarray(self.n_mats, dtype=float)
        want = 4 if self.sense == "minmax" else 3
        if self.m_mats.ndim != want:
            raise DimensionError(f"m_mats must have {want} axes for sense {self.sense}")
        if self.sense == "minmax" and self.n_mats is not None and np.any(self.n_mats != 0):
            raise DimensionError("minmax systems must be explicit (no implicit part)")

    @property
    def n(self) -> int:
        return self.m_mats.shape[-1]

    def missing_mask(self) -> np.ndarray:
        """True where an action does not exist at a component."""
        return ~np.isfinite(self.c_vecs)


@dataclass
class Trajectory:
    """States x^0..x^K plus the action labels chosen at each step."""

    states: np.ndarray               # (K+1, n)
    labels: np.ndarray               # (K, n) or (K, n, 2) for minmax
    meta: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return self.states.shape[0] - 1


def check_structure(d: DPDynamics, tol: float = 1e-9) -> dict:
    """Substochasticity audit over all (component, action) rows that exist.

    substochastic: every coefficient nonnegative and every existing row of
    M + N sums to at most one.  That property makes the map additively
    homogeneous (row sums exactly one) and monotone, hence nonexpansive;
    the two flags are reported from the same audit.
    """
    m = d.m_mats
    nn = d.n_mats if d.n_mats is not None else np.zeros_like(m)
    missing = d.missing_mask()
    nonneg = bool(np.all(m[~missing] >= -tol)) and bool(np.all(nn[~missing] >= -tol))
    sums = m.sum(axis=-1) + nn.sum(axis=-1)
    ok_rows = bool(np.all(sums[~missing] <= 1.0 + tol))
    sub = nonneg and ok_rows
    return {"substochastic": sub, "homogeneous_monotone": sub}


def _implicit_support(d: DPDynamics) -> np.ndarray:
    if d.n_mats is None:
        return np.zeros((d.n, d.n), dtype=bool)
    valid = ~d.missing_mask()
    sup = np.zeros((d.n, d.n), dtype=bool)
    flat_n = d.n_mats.reshape(-1, d.n, d.n)
    flat_valid = valid.reshape(-1, d.n)
    for a in range(flat_n.shape[0]):
        rows = flat_valid[a]
        sup[rows] |= flat_n[a][rows] > 0
    return sup


def triangular_order(d: DPDynamics) -> list[int]:
    """Component update order resolving implicit terms, or raise."""
    sup = _implicit_support(d)
    n = d.n
    indeg = sup.sum(axis=1)
    order: list[int] = []
    ready = sorted(np.nonzero(indeg == 0)[0].tolist())
    sup_work = sup.copy()
    while ready:
        u = ready.pop(0)
        order.append(u)
        dependents = np.nonzero(sup_work[:, u])[0]
        sup_work[:, u] = False
        for v in dependents:
            if not sup_work[v].any() and v not in order and v not in ready:
                ready.append(v)
        ready.sort()
    if len(order) != n:
        raise ImplicitCycleError("implicit dependencies are cyclic (system not triangular)")
    return order


def _compile_implicit(d: DPDynamics):
    """Per-component implicit programs as plain-python term lists.

    Maps component i -> [(action, [(col, coeff), ...]), ...] over all
    actions, for every component touched by some N row.  Plain floats keep
    the per-step resolution loop off the numpy small-array overhead.
    """
    if d.n_mats is None:
        return {}
    progs: dict[int, list[tuple[int, list[tuple[int, float]]]]] = {}
    a_count = d.m_mats.shape[0]
    touched = sorted({int(i) for a in range(a_count) for i in np.nonzero(d.n_mats[a].any(axis=1))[0]})
    for i in touched:
        entries = []
        for a in range(a_count):
            row = d.n_mats[a][i]
            cols = np.nonzero(row)[0]
            entries.append((a, [(int(cc), float(row[cc])) for cc in cols]))
        progs[i] = entries
    return progs


def iterate(d: DPDynamics, x0: np.ndarray, k_steps: int) -> Trajectory:
    """Exact iteration; ties broken by lowest action label (then lowest
    second-player label for games)."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (d.n,):
        raise DimensionError(f"x0 must have shape ({d.n},)")

    if d.sense == "minmax":
        return _iterate_minmax(d, x0, k_steps)

    order = triangular_order(d)
    progs = _compile_implicit(d)
    implicit_seq = [(i, progs[i]) for i in order if i in progs]
    reducer = np.max if d.sense == "max" else np.min
    arg_reducer = np.argmax if d.sense == "max" else np.argmin
    maximize = d.sense == "max"

    states = np.empty((k_steps + 1, d.n))
    labels = np.empty((k_steps, d.n), dtype=int)
    states[0] = x0
    x_prev = x0
    m = d.m_mats
    c = d.c_vecs
    for k in range(k_steps):
        base = np.einsum("aij,j->ai", m, x_prev) + c
        x = reducer(base, axis=0)
        lab = arg_reducer(base, axis=0)
        if implicit_seq:
            base_l = base.tolist()
            x_l = x.tolist()
            for i, prog in implicit_seq:
                best = None
                best_a = 0
                for a, terms in prog:
                    v = base_l[a][i]
                    for col, coeff in terms:
                        v += coeff * x_l[col]
                    if best is None or (v > best if maximize else v < best):
                        best, best_a = v, a
                x_l[i] = best
                lab[i] = best_a
            x = np.asarray(x_l)
        if not np.all(np.isfinite(x)):
            raise StructureError("state diverged to +-inf; check action coverage")
        states[k + 1] = x
        labels[k] = lab
        x_prev = x
    return Trajectory(states=states, labels=labels)


def _iterate_minmax(d: DPDynamics, x0: np.ndarray, k_steps: int) -> Trajectory:
    states = np.empty((k_steps + 1, d.n))
    labels = np.empty((k_steps, d.n, 2), dtype=int)
    states[0] = x0
    x = x0
    m = d.m_mats
    c = d.c_vecs
    for k in range(k_steps):
        vals = np.einsum("zwij,j->zwi", m, x) + c
        inner = vals.max(axis=1)             # max over w
        w_lab = vals.argmax(axis=1)          # (Z, n)
        z_lab = inner.argmin(axis=0)         # (n,)
        x = inner.min(axis=0)
        labels[k, :, 0] = z_lab
        labels[k, :, 1] = w_lab[z_lab, np.arange(d.n)]
        if not np.all(np.isfinite(x)):
            raise StructureError("state diverged to +-inf; check action coverage")
        states[k + 1] = x
    return Trajectory(states=states, labels=labels)


def growth_rate(traj: Trajectory) -> tuple[float, float]:
    """(mu_estimate, spread) over the trajectory's second half.

    mu is the component mean of (x^K - x^{K/2}) / (K - K/2); the spread
    (max - min across components) is the convergence diagnostic.
    """
    states = traj.states
    k = states.shape[0] - 1
    half = k // 2
    if half < 1:
        raise ValueError("trajectory too short for growth estimation")
    rates = (states[k] - states[half]) / (k - half)
    return float(np.mean(rates)), float(np.max(rates) - np.min(rates))


def full_span_growth(traj: Trajectory) -> np.ndarray:
    """Componentwise (x^K - x^0) / K."""
    states = traj.states
    k = states.shape[0] - 1
    return (states[k] - states[0]) / k


def map_graph(d: DPDynamics) -> PrecedenceGraph:
    """Influence graph: arc i -> j iff some (M^u + N^u)_{ji} > 0.

    Explicit dependencies carry duration 1, implicit ones duration 0; the
    weight is the largest coefficient seen on the pair.
    """
    n = d.n
    valid = ~d.missing_mask()
    m_flat = d.m_mats.reshape(-1, n, n)
    v_flat = valid.reshape(-1, n)
    best_m = np.zeros((n, n))
    for a in range(m_flat.shape[0]):
        rows = v_flat[a]
        best_m[rows] = np.maximum(best_m[rows], m_flat[a][rows])
    arcs = []
    for jj, ii in zip(*np.nonzero(best_m > 0)):
        arcs.append(Arc(src=int(ii), dst=int(jj), duration=1, weight=float(best_m[jj, ii])))
    if d.n_mats is not None:
        n_flat = d.n_mats.reshape(-1, n, n)
        best_n = np.zeros((n, n))
        for a in range(n_flat.shape[0]):
            rows = v_flat[a]
            best_n[rows] = np.maximum(best_n[rows], n_flat[a][rows])
        for jj, ii in zip(*np.nonzero(best_n > 0)):
            arcs.append(Arc(src=int(ii), dst=int(jj), duration=0, weight=float(best_n[jj, ii])))
    return PrecedenceGraph(n=n, arcs=arcs)


def is_strongly_connected(g: PrecedenceGraph) -> bool:
    return graph_strongly_connected(g)


def trajectory_to_csv(traj: Trajectory, fp, index_name: str = "k") -> None:
    """Dump states as CSV rows (k, x_1 .. x_n)."""
    import csv

    own = isinstance(fp, str)
    handle = open(fp, "w", newline="") if own else fp
    try:
        writer = csv.writer(handle)
        n = traj.states.shape[1]
        writer.writerow([index_name] + [f"x_{i + 1}" for i in range(n)])
        for k, row in enumerate(traj.states):
            writer.writerow([k] + [repr(float(v)) for v in row])
    finally:
        if own:
            handle.close()

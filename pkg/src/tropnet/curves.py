"""Min-plus curve dioid and network-calculus bound machinery.

Curves are nondecreasing functions of discrete time sampled on a uniform
grid: ``samples[k]`` is the value at t = k steps, and beyond the horizon the
curve continues affinely at ``tail_rate`` per step.  Values live in
[0, +inf]; +inf marks "no constraint yet" (the zero element of the dioid is
identically +inf, the unit is 0 at t=0 and +inf after).

The two products are the pointwise minimum and the min-plus convolution
(f*g)(t) = min_{0<=s<=t} f(s) + g(t-s).  Deconvolution (sup of differences)
estimates arrival curves from flows; sub-additive closure resolves feedback
(the maximum subsolution of Y = f*Y + U is f**U).
"""

from __future__ import annotations

import csv
import math
import warnings

import numpy as np

from .errors import DimensionError, IncomparableFlowsError, UnitError

INF = float("inf")

__all__ = [
    "INF",
    "Curve",
    "CurveMatrix",
    "HorizonWarning",
    "eps_curve",
    "unit_curve",
    "gain_curve",
    "shift_curve",
    "affine_curve",
    "rate_latency_curve",
    "gain_shift_curve",
    "gain_shift_closure",
    "curve_from_samples",
    "cmin",
    "conv",
    "deconv",
    "maxdeconv",
    "closure",
    "backlog_bound",
    "delay_bound",
    "output_bound",
    "estimate_arrival_curves",
    "time_shift_matrix",
    "arrival_matrix",
    "mimo_delay_bound",
    "curve_to_csv",
    "curve_from_csv",
]


class HorizonWarning(UserWarning):
    """A sup/inf was attained at the horizon edge; the bound may be truncated."""


class Curve:
    """Sampled nondecreasing curve with an affine tail."""

    __slots__ = ("samples", "tail_rate", "time_step")

    def __init__(self, samples, tail_rate: float = INF, time_step: float = 1.0):
        arr = np.asarray(samples, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("samples must be a non-empty 1-d array")
        if np.any(np.isnan(arr)) or np.any(arr < -1e-9):
            raise ValueError("samples must be in [0, +inf]")
        arr = np.maximum(arr, 0.0)
        with np.errstate(invalid="ignore"):
            d = np.diff(arr)
        if np.any(d < -1e-9):
            raise ValueError("samples must be nondecreasing")
        arr = np.maximum.accumulate(arr)
        if tail_rate < 0:
            raise ValueError("tail_rate must be >= 0 or +inf")
        if np.isinf(arr[-1]):
            tail_rate = INF
        self.samples = arr
        self.tail_rate = float(tail_rate)
        self.time_step = float(time_step)

    @property
    def horizon(self) -> int:
        return self.samples.size - 1

    def value(self, k: int) -> float:
        """Value at step k (k may exceed the horizon; affine extension)."""
        if k < 0:
            raise IndexError("curve is defined for t >= 0")
        h = self.horizon
        if k <= h:
            return float(self.samples[k])
        if np.isinf(self.samples[h]):
            return INF
        if np.isinf(self.tail_rate):
            return INF
        return float(self.samples[h] + self.tail_rate * (k - h))

    def extended(self, upto: int) -> np.ndarray:
        """Sample array extended to step index ``upto`` inclusive."""
        h = self.horizon
        if upto <= h:
            return self.samples[: upto + 1]
        ext = np.empty(upto + 1)
        ext[: h + 1] = self.samples
        last = self.samples[h]
        if np.isinf(last) or np.isinf(self.tail_rate):
            ext[h + 1 :] = INF
        else:
            ext[h + 1 :] = last + self.tail_rate * np.arange(1, upto - h + 1)
        return ext

    def finite_tail_rate(self) -> float:
        """Tail rate if finite, else a slope measured near the horizon."""
        if not np.isinf(self.tail_rate):
            return self.tail_rate
        return measured_tail_rate(self)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Curve)
            and self.time_step == other.time_step
            and self.samples.size == other.samples.size
            and bool(np.all((self.samples == other.samples) | (np.isinf(self.samples) & np.isinf(other.samples))))
        )

    def allclose(self, other: "Curve", tol: float = 1e-9) -> bool:
        if self.samples.size != other.samples.size:
            return False
        a, b = self.samples, other.samples
        both_inf = np.isinf(a) & np.isinf(b)
        with np.errstate(invalid="ignore"):
            close = np.abs(a - b) <= tol
        return bool(np.all(both_inf | close))

    def __le__(self, other: "Curve") -> bool:
        n = min(self.samples.size, other.samples.size)
        return bool(np.all(self.samples[:n] <= other.samples[:n] + 1e-9))

    def __repr__(self) -> str:
        head = ", ".join(f"{v:g}" for v in self.samples[:4])
        return f"Curve([{head}...], H={self.horizon}, tail={self.tail_rate:g}, dt={self.time_step:g})"


def measured_tail_rate(curve: Curve, window: int | None = None) -> float:
    """Slope estimate over the last part of the horizon."""
    h = curve.horizon
    if h == 0:
        return 0.0 if not np.isinf(curve.samples[0]) else INF
    w = max(1, h // 4) if window is None else min(window, h)
    a, b = curve.samples[h - w], curve.samples[h]
    if np.isinf(b):
        return INF
    return float((b - a) / w)


# ---------------------------------------------------------------------------
# Atoms
# ---------------------------------------------------------------------------

def eps_curve(horizon: int, time_step: float = 1.0) -> Curve:
    """Dioid zero: identically +inf."""
    return Curve(np.full(horizon + 1, INF), INF, time_step)


def unit_curve(horizon: int, time_step: float = 1.0) -> Curve:
    """Dioid unit e: 0 at t = 0, +inf after."""
    s = np.full(horizon + 1, INF)
    s[0] = 0.0
    return Curve(s, INF, time_step)


def gain_curve(p: float, horizon: int, time_step: float = 1.0) -> Curve:
    """Gain atom: worth p at t = 0, +inf after."""
    s = np.full(horizon + 1, INF)
    s[0] = float(p)
    return Curve(s, INF, time_step)


def shift_curve(tau_steps: int, horizon: int, time_step: float = 1.0) -> Curve:
    """Shift atom: 0 up to tau steps inclusive, +inf after."""
    s = np.full(horizon + 1, INF)
    s[: min(tau_steps, horizon) + 1] = 0.0
    return Curve(s, INF, time_step)


def gain_shift_curve(p: float, tau_steps: int, horizon: int, time_step: float = 1.0) -> Curve:
    """Product of a gain and a shift: p up to tau steps, +inf after."""
    s = np.full(horizon + 1, INF)
    s[: min(tau_steps, horizon) + 1] = float(p)
    return Curve(s, INF, time_step)


def affine_curve(rate: float, offset: float, horizon: int, time_step: float = 1.0) -> Curve:
    """rate * t + offset (rate per step)."""
    return Curve(offset + rate * np.arange(horizon + 1), rate, time_step)


def rate_latency_curve(rate: float, latency_steps: float, horizon: int, time_step: float = 1.0) -> Curve:
    """rate * (t - latency)^+ (rate per step)."""
    t = np.arange(horizon + 1, dtype=float)
    return Curve(rate * np.maximum(t - latency_steps, 0.0), rate, time_step)


def gain_shift_closure(p: float, tau_seconds: float, horizon: int, time_step: float = 1.0) -> Curve:
    """Exact sub-additive closure of a gain-shift atom, sampled on the grid.

    The closure of "p per tau" is p * ceil(t / tau), a staircase of long-run
    slope p/tau that needs no on-grid breakpoints; sampling the closed form
    keeps the rate exact even when tau is not a multiple of the step.
    """
    if tau_seconds <= 0:
        raise ValueError("tau must be positive")
    t = np.arange(horizon + 1, dtype=float) * time_step
    ratio = t / tau_seconds
    k = np.ceil(ratio - 1e-12)
    return Curve(p * k, p * time_step / tau_seconds, time_step)


def curve_from_samples(samples, tail_rate: float = INF, time_step: float = 1.0) -> Curve:
    return Curve(samples, tail_rate, time_step)


# ---------------------------------------------------------------------------
# Dioid operations
# ---------------------------------------------------------------------------

def _check_steps(f: Curve, g: Curve):
    if abs(f.time_step - g.time_step) > 1e-12:
        raise UnitError(f"time_step mismatch: {f.time_step} vs {g.time_step}")


def cmin(f: Curve, g: Curve) -> Curve:
    """Pointwise minimum (dioid addition)."""
    _check_steps(f, g)
    h = min(f.horizon, g.horizon)
    return Curve(
        np.minimum(f.samples[: h + 1], g.samples[: h + 1]),
        min(f.tail_rate, g.tail_rate),
        f.time_step,
    )


def conv(f: Curve, g: Curve) -> Curve:
    """Min-plus convolution (dioid product)."""
    _check_steps(f, g)
    h = min(f.horizon, g.horizon)
    fa = f.samples[: h + 1]
    ga = g.samples[: h + 1]
    out = np.empty(h + 1)
    for t in range(h + 1):
        out[t] = np.min(fa[: t + 1] + ga[t::-1])
    return Curve(out, min(f.tail_rate, g.tail_rate), f.time_step)


def _sup_diff(f_seg: np.ndarray, g_seg: np.ndarray) -> float:
    """sup over positions of f - g.

    +inf in f dominates the sup (including against a +inf g, the
    conservative convention for upper bounds); +inf in g against finite f
    contributes nothing.
    """
    inf_f = np.isinf(f_seg)
    if np.any(inf_f):
        return INF
    inf_g = np.isinf(g_seg)
    vals = f_seg[~inf_g] - g_seg[~inf_g]
    return float(np.max(vals)) if vals.size else 0.0


def _inf_diff(f_seg: np.ndarray, g_seg: np.ndarray) -> float:
    """inf over positions of f - g; any +inf operand removes that position."""
    finite = ~(np.isinf(f_seg) | np.isinf(g_seg))
    vals = f_seg[finite] - g_seg[finite]
    return float(np.min(vals)) if vals.size else INF


def _deconv_values(f: Curve, g: Curve, t_indices: np.ndarray, sup: bool) -> np.ndarray:
    """sup or inf over s >= 0 of f(t+s) - g(s), evaluated at the given t."""
    hg = g.horizon
    tmax = int(t_indices.max())
    f_ext = f.extended(tmax + hg)
    ga = g.samples
    reducer = _sup_diff if sup else _inf_diff
    out = np.empty(t_indices.size)
    for idx, t in enumerate(t_indices):
        out[idx] = reducer(f_ext[t : t + hg + 1], ga)
    return out


def _rates_diverge(f: Curve, g: Curve) -> bool:
    rf = f.finite_tail_rate()
    rg = g.finite_tail_rate()
    return rf > rg + 1e-12 and np.isfinite(rf)


def deconv(f: Curve, g: Curve) -> Curve:
    """(f (/) g)(t) = sup_{s>=0} f(t+s) - g(s), clamped below at 0.

    Returns an all-+inf curve when f grows faster than g (divergent sup).
    """
    _check_steps(f, g)
    h = f.horizon
    if _rates_diverge(f, g):
        return eps_curve(h, f.time_step)
    vals = _deconv_values(f, g, np.arange(h + 1), sup=True)
    vals = np.maximum(vals, 0.0)
    tail = f.finite_tail_rate()
    return Curve(vals, tail if np.isfinite(tail) else INF, f.time_step)


def maxdeconv(f: Curve, g: Curve) -> Curve:
    """(f (\\) g)(t) = inf_{s>=0} f(t+s) - g(s), clamped below at 0."""
    _check_steps(f, g)
    h = f.horizon
    vals = _deconv_values(f, g, np.arange(h + 1), sup=False)
    vals = np.maximum(vals, 0.0)
    vals = np.maximum.accumulate(vals)
    return Curve(vals, f.tail_rate, f.time_step)


def closure(f: Curve, max_rounds: int | None = None) -> Curve:
    """Sub-additive closure f* = min_k f^k (k >= 0) on the horizon.

    Computed by iterated squaring of (e + f) to a fixpoint.  Requires
    f(0) >= 0, which the curve type already guarantees.
    """
    h = f.horizon
    s = cmin(unit_curve(h, f.time_step), f)
    rounds = max_rounds or (2 + int(math.ceil(math.log2(h + 1))) if h else 1)
    for _ in range(rounds):
        nxt = conv(s, s)
        if nxt.allclose(s, 1e-12):
            break
        s = nxt
    tail = min(f.tail_rate, measured_tail_rate(s))
    return Curve(s.samples, tail, f.time_step)


# ---------------------------------------------------------------------------
# Curve matrices
# ---------------------------------------------------------------------------

class CurveMatrix:
    """Matrix with Curve entries over (min, *)."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        self.entries = [list(row) for row in entries]
        cols = len(self.entries[0])
        if any(len(row) != cols for row in self.entries):
            raise DimensionError("ragged curve matrix")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    def __getitem__(self, ij):
        return self.entries[ij[0]][ij[1]]

    @classmethod
    def identity(cls, n: int, horizon: int, time_step: float = 1.0) -> "CurveMatrix":
        return cls(
            [
                [
                    unit_curve(horizon, time_step) if i == j else eps_curve(horizon, time_step)
                    for j in range(n)
                ]
                for i in range(n)
            ]
        )

    def __add__(self, other: "CurveMatrix") -> "CurveMatrix":
        if self.shape != other.shape:
            raise DimensionError("shape mismatch")
        return CurveMatrix(
            [
                [cmin(a, b) for a, b in zip(ra, rb)]
                for ra, rb in zip(self.entries, other.entries)
            ]
        )

    def __matmul__(self, other: "CurveMatrix") -> "CurveMatrix":
        n, k = self.shape
        k2, m = other.shape
        if k != k2:
            raise DimensionError("inner dims mismatch")
        out = []
        for i in range(n):
            row = []
            for j in range(m):
                acc = None
                for l in range(k):
                    term = conv(self.entries[i][l], other.entries[l][j])
                    acc = term if acc is None else cmin(acc, term)
                row.append(acc)
            out.append(row)
        return CurveMatrix(out)

    def vecmul(self, vec: list[Curve]) -> list[Curve]:
        n, k = self.shape
        if len(vec) != k:
            raise DimensionError("vector length mismatch")
        out = []
        for i in range(n):
            acc = None
            for l in range(k):
                term = conv(self.entries[i][l], vec[l])
                acc = term if acc is None else cmin(acc, term)
            out.append(acc)
        return out

    def scale(self, scalar: Curve) -> "CurveMatrix":
        """Entrywise convolution with a scalar curve."""
        return CurveMatrix([[conv(scalar, c) for c in row] for row in self.entries])

    def allclose(self, other: "CurveMatrix", tol: float = 1e-9) -> bool:
        return all(
            a.allclose(b, tol)
            for ra, rb in zip(self.entries, other.entries)
            for a, b in zip(ra, rb)
        )


def matrix_closure(f: CurveMatrix, max_rounds: int | None = None) -> CurveMatrix:
    """F* = min_k F^k computed by iterated squaring of (e + F)."""
    n, m = f.shape
    if n != m:
        raise DimensionError("closure needs a square matrix")
    h = min(c.horizon for row in f.entries for c in row)
    dt = f.entries[0][0].time_step
    s = CurveMatrix.identity(n, h, dt) + f
    rounds = max_rounds or (2 + int(math.ceil(math.log2(h + 1))) if h else 1)
    for _ in range(rounds):
        nxt = s @ s
        if nxt.allclose(s, 1e-12):
            break
        s = nxt
    return s


# ---------------------------------------------------------------------------
# Performance bounds
# ---------------------------------------------------------------------------

def backlog_bound(alpha: Curve, beta: Curve) -> float:
    """sup_s alpha(s) - beta(s); +inf when the arrival rate beats the service."""
    _check_steps(alpha, beta)
    if _rates_diverge(alpha, beta):
        return INF
    h = min(alpha.horizon, beta.horizon)
    a = alpha.samples[: h + 1]
    b = beta.samples[: h + 1]
    if np.any(np.isinf(a)):
        return INF
    finite = ~np.isinf(b)
    if not np.any(finite):
        return 0.0
    diffs = a[finite] - b[finite]
    k = int(np.argmax(diffs))
    best = float(diffs[k])
    if best > 0 and int(np.nonzero(finite)[0][k]) == h:
        warnings.warn("backlog sup attained at horizon edge", HorizonWarning)
    return max(best, 0.0)


def delay_bound(alpha: Curve, beta: Curve) -> float:
    """Max horizontal deviation sup_s inf{h >= 0 : beta(s+h) >= alpha(s)} in steps."""
    _check_steps(alpha, beta)
    if _rates_diverge(alpha, beta):
        return INF
    h = min(alpha.horizon, beta.horizon)
    a = alpha.samples[: h + 1]
    # extend beta far enough for the worst horizontal gap
    ext_len = 4 * h + 4
    b_ext = beta.extended(ext_len)
    best = 0
    best_at = 0
    for s in range(h + 1):
        target = a[s]
        if np.isinf(target):
            continue
        # smallest index >= s with beta >= target
        idx = int(np.searchsorted(b_ext, target - 1e-12, side="left"))
        if idx >= b_ext.size:
            return INF
        idx = max(idx, s)
        if b_ext[idx] < target - 1e-12:
            return INF
        d = idx - s
        if d > best:
            best, best_at = d, s
    if best and best_at == h:
        warnings.warn("delay sup attained at horizon edge", HorizonWarning)
    return float(best)


def output_bound(alpha: Curve, beta: Curve) -> Curve:
    """Arrival curve of the departure flow: alpha (/) beta."""
    return deconv(alpha, beta)


def bound_report(alpha: Curve, beta: Curve) -> dict:
    """Backlog, delay (steps and seconds) and output arrival curve."""
    b = backlog_bound(alpha, beta)
    d = delay_bound(alpha, beta)
    return {
        "backlog": b,
        "delay_steps": d,
        "delay_s": d * alpha.time_step if np.isfinite(d) else INF,
        "output_curve": output_bound(alpha, beta),
        "unbounded": not (np.isfinite(b) and np.isfinite(d)),
    }


# ---------------------------------------------------------------------------
# Arrival estimation and MIMO machinery
# ---------------------------------------------------------------------------

def estimate_arrival_curves(u: Curve) -> tuple[Curve, Curve]:
    """(maximum, minimum) arrival curves of a cumulative flow."""
    return deconv(u, u), maxdeconv(u, u)


def time_shift_matrix(flows: list[Curve], rate_rel_tol: float = 1e-6) -> np.ndarray:
    """T_ij = sup_t inf{s >= 0 : U_i(t+s) >= U_j(t)} in steps.

    All flows must share the same asymptotic average rate; otherwise one of
    T_ij, T_ji would be infinite.
    """
    if not flows:
        raise ValueError("need at least one flow")
    rates = [u.finite_tail_rate() for u in flows]
    ref = max(abs(r) for r in rates) or 1.0
    if max(rates) - min(rates) > rate_rel_tol * ref:
        raise IncomparableFlowsError(f"flow rates differ: {rates}")
    n = len(flows)
    h = min(u.horizon for u in flows)
    t_mat = np.zeros((n, n))
    for i in range(n):
        ui_ext = flows[i].extended(4 * h + 4)
        for j in range(n):
            if i == j:
                continue
            uj = flows[j].samples[: h + 1]
            worst = 0
            for t in range(h + 1):
                target = uj[t]
                if np.isinf(target):
                    continue
                idx = int(np.searchsorted(ui_ext, target - 1e-12, side="left"))
                if idx >= ui_ext.size:
                    raise IncomparableFlowsError("time shift diverges within window")
                worst = max(worst, idx - t)
            t_mat[i, j] = worst
    return t_mat


def _deconv_shifted(f: Curve, g: Curve, shift_steps: int) -> Curve:
    """Curve whose value at t is (f (/) g)(t - shift), for t >= 0.

    For negative arguments tau = t - shift the sup runs over s >= -tau so
    both operands stay in the domain (the back-shift interpretation of the
    negative-exponent shift in the arrival-matrix definition).
    """
    _check_steps(f, g)
    h = f.horizon
    hg = g.horizon
    f_ext = f.extended(h + hg)
    ga = g.samples
    vals = np.empty(h + 1)
    for k in range(h + 1):
        tau = k - shift_steps
        s0 = max(0, -tau)
        if s0 > hg:
            vals[k] = 0.0
            continue
        vals[k] = _sup_diff(f_ext[tau + s0 : tau + hg + 1], ga[s0 : hg + 1])
    vals = np.maximum(vals, 0.0)
    vals = np.maximum.accumulate(vals)
    return Curve(vals, f.finite_tail_rate(), f.time_step)


def arrival_matrix(flows: list[Curve]) -> tuple[CurveMatrix, np.ndarray]:
    """Arrival matrix and time-shift matrix of a flow vector.

    Diagonal entries are self-deconvolutions; entry (i, j) bounds
    U_i(t) - U_j(s) <= alpha_ij(T_ij + t - s).
    """
    t_mat = time_shift_matrix(flows)
    n = len(flows)
    entries = []
    for i in range(n):
        row = []
        for j in range(n):
            row.append(_deconv_shifted(flows[i], flows[j], int(t_mat[i, j])))
        entries.append(row)
    return CurveMatrix(entries), t_mat


def unshift_curve(c: Curve, shift_steps: int) -> Curve:
    """Left-shift a curve: result(t) = c(t + shift)."""
    if shift_steps == 0:
        return c
    ext = c.extended(c.horizon + shift_steps)
    return Curve(ext[shift_steps:], c.tail_rate, c.time_step)


def mimo_delay_bound(alpha: CurveMatrix, t_mat: np.ndarray, beta: CurveMatrix) -> dict:
    """Per-flow delay bounds d_i = max_j (T_ij + hdev_ij) in steps/seconds.

    hdev_ij is the horizontal deviation between the unshifted pair
    deconvolution (the arrival-matrix entry with its time shift removed)
    and beta_ij; adding T_ij on top upper-bounds the tighter
    negative-window form and matches the procedure the bounds tables use.
    """
    n, m = alpha.shape
    if beta.shape != (n, m):
        raise DimensionError("alpha and beta shapes differ")
    dt = alpha.entries[0][0].time_step
    comp = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            plain = unshift_curve(alpha.entries[i][j], int(t_mat[i, j]))
            hd = delay_bound(plain, beta.entries[i][j])
            comp[i, j] = t_mat[i, j] + hd if np.isfinite(hd) else INF
    per_flow = comp.max(axis=1)
    return {
        "components_steps": comp,
        "delay_steps": per_flow,
        "delay_s": per_flow * dt,
        "unbounded": bool(np.any(~np.isfinite(per_flow))),
    }


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def curve_to_csv(curve: Curve, fp) -> None:
    """CSV columns (t, value); tail rate and step in a header comment."""
    own = isinstance(fp, (str,))
    handle = open(fp, "w", newline="") if own else fp
    try:
        handle.write(f"# tail_rate={curve.tail_rate!r} time_step={curve.time_step!r}\n")
        writer = csv.writer(handle)
        writer.writerow(["t", "value"])
        for k, v in enumerate(curve.samples):
            writer.writerow([k, "inf" if np.isinf(v) else repr(float(v))])
    finally:
        if own:
            handle.close()


def curve_from_csv(fp) -> Curve:
    own = isinstance(fp, (str,))
    handle = open(fp, "r", newline="") if own else fp
    try:
        first = handle.readline().strip()
        if not first.startswith("#"):
            raise ValueError("missing curve header comment")
        meta = dict(part.split("=") for part in first[1:].split())
        tail = float(meta["tail_rate"])
        dt = float(meta["time_step"])
        reader = csv.reader(handle)
        header = next(reader)
        if header[:2] != ["t", "value"]:
            raise ValueError("expected t,value columns")
        vals = [float(row[1]) for row in reader]
        return Curve(np.array(vals), tail, dt)
    finally:
        if own:
            handle.close()



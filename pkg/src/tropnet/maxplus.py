"""Max-plus (tropical) algebra: scalars, matrices, polynomial matrices.

The semiring is (R u {-inf}, max, +).  The additive identity -inf is kept as
the IEEE value ``-inf`` and is absorbing for the product; +inf is never
admitted into a tropical value, so no nan can arise from the arithmetic.

Polynomial matrices A(g) = A_0 + g A_1 + ... + g^p A_p encode event-graph
dynamics x^k = A(g) x^k where g is the event back-shift.  The spectral
quantities (maximum cycle ratio of the precedence graph, generalized
eigenvectors) give the asymptotic growth rate of those dynamics.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    ImplicitCycleError,
    SizeLimitError,
    StructureError,
    UnboundedError,
)

TROPICAL_ZERO = float("-inf")   # additive identity, absorbing for the product
TROPICAL_ONE = 0.0              # multiplicative identity

__all__ = [
    "TROPICAL_ZERO",
    "TROPICAL_ONE",
    "TropicalMatrix",
    "TropicalPolyMatrix",
    "PrecedenceGraph",
    "Arc",
    "build_precedence_graph",
    "is_irreducible",
    "max_cycle_ratio",
    "enumerate_cycle_ratios",
    "generalized_eigenvector",
    "simulate_maxplus",
    "trajectory_growth",
    "kleene_star",
]


def _as_tropical_array(data) -> np.ndarray:
    arr = np.array(data, dtype=float)
    if np.any(np.isposinf(arr)) or np.any(np.isnan(arr)):
        raise ValueError("tropical entries must be finite or -inf")
    return arr


class TropicalMatrix:
    """Dense matrix over the max-plus semiring.

    ``A + B`` is the entrywise max, ``A @ B`` the max-plus product
    (A @ B)_ij = max_k (A_ik + B_kj).
    """

    __slots__ = ("a",)

    def __init__(self, data):
        self.a = _as_tropical_array(data)
        if self.a.ndim != 2:
            raise DimensionError("expected a 2-d array")

    @property
    def shape(self) -> tuple[int, int]:
        return self.a.shape

    @classmethod
    def zeros(cls, rows: int, cols: int | None = None) -> "TropicalMatrix":
        cols = rows if cols is None else cols
        return cls(np.full((rows, cols), TROPICAL_ZERO))

    @classmethod
    def identity(cls, n: int) -> "TropicalMatrix":
        m = np.full((n, n), TROPICAL_ZERO)
        np.fill_diagonal(m, TROPICAL_ONE)
        return cls(m)

    def __add__(self, other: "TropicalMatrix") -> "TropicalMatrix":
        if self.shape != other.shape:
            raise DimensionError(f"shape mismatch {self.shape} vs {other.shape}")
        return TropicalMatrix(np.maximum(self.a, other.a))

    def __matmul__(self, other: "TropicalMatrix") -> "TropicalMatrix":
        if self.shape[1] != other.shape[0]:
            raise DimensionError(f"inner dims {self.shape} vs {other.shape}")
        return TropicalMatrix((self.a[:, :, None] + other.a[None, :, :]).max(axis=1))

    def vecmul(self, v: np.ndarray) -> np.ndarray:
        """Max-plus matrix-vector product."""
        return (self.a + np.asarray(v, dtype=float)[None, :]).max(axis=1)

    def power(self, k: int) -> "TropicalMatrix":
        if k < 0:
            raise ValueError("negative tropical matrix power")
        result = TropicalMatrix.identity(self.shape[0])
        base = self
        while k:
            if k & 1:
                result = result @ base
            k >>= 1
            if k:
                base = base @ base
        return result

    def __eq__(self, other) -> bool:
        return isinstance(other, TropicalMatrix) and np.array_equal(self.a, other.a)

    def allclose(self, other: "TropicalMatrix", tol: float = 1e-9) -> bool:
        both_eps = np.isneginf(self.a) & np.isneginf(other.a)
        with np.errstate(invalid="ignore"):
            close = np.abs(self.a - other.a) <= tol
        return bool(np.all(both_eps | close))

    def __repr__(self) -> str:
        return f"TropicalMatrix({self.a!r})"


class TropicalPolyMatrix:
    """Square polynomial matrix A(g) = sum_l g^l A_l over the max-plus semiring."""

    __slots__ = ("coeffs", "n")

    def __init__(self, coeffs):
        mats = [c.a if isinstance(c, TropicalMatrix) else _as_tropical_array(c) for c in coeffs]
        if not mats:
            raise ValueError("need at least one coefficient matrix")
        n = mats[0].shape[0]
        for m in mats:
            if m.shape != (n, n):
                raise DimensionError("all coefficients must be square of equal size")
        while len(mats) > 1 and np.all(np.isneginf(mats[-1])):
            mats.pop()
        self.coeffs = [m.copy() for m in mats]
        self.n = n

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def coeff(self, l: int) -> TropicalMatrix:
        if l > self.degree:
            return TropicalMatrix.zeros(self.n)
        return TropicalMatrix(self.coeffs[l])

    def __add__(self, other: "TropicalPolyMatrix") -> "TropicalPolyMatrix":
        if self.n != other.n:
            raise DimensionError("size mismatch")
        p = max(self.degree, other.degree)
        out = []
        for l in range(p + 1):
            a = self.coeffs[l] if l <= self.degree else None
            b = other.coeffs[l] if l <= other.degree else None
            if a is None:
                out.append(b.copy())
            elif b is None:
                out.append(a.copy())
            else:
                out.append(np.maximum(a, b))
        return TropicalPolyMatrix(out)

    def __matmul__(self, other: "TropicalPolyMatrix") -> "TropicalPolyMatrix":
        if self.n != other.n:
            raise DimensionError("size mismatch")
        p = self.degree + other.degree
        out = [np.full((self.n, self.n), TROPICAL_ZERO) for _ in range(p + 1)]
        for i, a in enumerate(self.coeffs):
            ta = TropicalMatrix(a)
            for j, b in enumerate(other.coeffs):
                prod = (ta @ TropicalMatrix(b)).a
                np.maximum(out[i + j], prod, out=out[i + j])
        return TropicalPolyMatrix(out)

    def evaluate(self, x: float) -> TropicalMatrix:
        """Valuation homomorphism: max over l of (A_l + l*x) entrywise.

        ``x = -inf`` kills every term of positive degree.
        """
        acc = np.full((self.n, self.n), TROPICAL_ZERO)
        for l, c in enumerate(self.coeffs):
            if l > 0 and np.isneginf(x):
                continue
            np.maximum(acc, c + l * x, out=acc)
        return TropicalMatrix(acc)

    def support_union(self) -> np.ndarray:
        """Boolean support of A(e) (union over all coefficient supports)."""
        sup = np.zeros((self.n, self.n), dtype=bool)
        for c in self.coeffs:
            sup |= ~np.isneginf(c)
        return sup

    def __repr__(self) -> str:
        return f"TropicalPolyMatrix(n={self.n}, degree={self.degree})"


@dataclass(frozen=True)
class Arc:
    """Graph arc src -> dst carrying a duration (event lag) and a weight (time)."""

    src: int
    dst: int
    duration: int
    weight: float


@dataclass
class PrecedenceGraph:
    """Precedence graph of a polynomial matrix.

    Arc (i, j, l) exists iff (A_l)_{ji} != -inf; its weight is that entry.
    Node indices are 0-based.
    """

    n: int
    arcs: list[Arc] = field(default_factory=list)

    def out_arcs(self) -> list[list[Arc]]:
        adj: list[list[Arc]] = [[] for _ in range(self.n)]
        for arc in self.arcs:
            adj[arc.src].append(arc)
        return adj


def build_precedence_graph(a: TropicalPolyMatrix) -> PrecedenceGraph:
    arcs = []
    for l, c in enumerate(a.coeffs):
        js, is_ = np.nonzero(~np.isneginf(c))
        for j, i in zip(js.tolist(), is_.tolist()):
            arcs.append(Arc(src=i, dst=j, duration=l, weight=float(c[j, i])))
    return PrecedenceGraph(n=a.n, arcs=arcs)


def _strongly_connected(n: int, edges: list[tuple[int, int]]) -> bool:
    if n == 0:
        return False
    adj = [[] for _ in range(n)]
    radj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        radj[v].append(u)

    def reaches_all(start: int, graph) -> bool:
        seen = [False] * n
        seen[start] = True
        stack = [start]
        count = 1
        while stack:
            u = stack.pop()
            for v in graph[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    stack.append(v)
        return count == n

    return reaches_all(0, adj) and reaches_all(0, radj)


def is_irreducible(a: TropicalPolyMatrix) -> bool:
    """True iff the support graph of A(e) is strongly connected."""
    sup = a.support_union()
    edges = [(int(i), int(j)) for j, i in zip(*np.nonzero(sup))]
    return _strongly_connected(a.n, edges)


def graph_strongly_connected(g: PrecedenceGraph) -> bool:
    return _strongly_connected(g.n, [(arc.src, arc.dst) for arc in g.arcs])


def _positive_cycle(g: PrecedenceGraph, mu: float) -> list[int] | None:
    """Find a cycle with W(c) - mu * D(c) > 0, or None.

    Longest-path Bellman-Ford from a virtual source; a relaxation surviving
    n passes certifies a positive cycle, recovered by a marking walk over
    predecessor pointers.
    """
    n = g.n
    dist = [0.0] * n
    pred: list[int | None] = [None] * n
    relaxed_last: list[int] = []
    for _pass in range(n + 1):
        relaxed_last = []
        for arc in g.arcs:
            cand = dist[arc.src] + arc.weight - mu * arc.duration
            if cand > dist[arc.dst] + 1e-15:
                dist[arc.dst] = cand
                pred[arc.dst] = arc.src
                relaxed_last.append(arc.dst)
        if not relaxed_last:
            return None
    for witness in relaxed_last:
        mark = {}
        v: int | None = witness
        step = 0
        while v is not None and v not in mark:
            mark[v] = step
            step += 1
            v = pred[v]
        if v is not None:
            cycle_rev = [v]
            u = pred[v]
            while u != v:
                cycle_rev.append(u)
                u = pred[u]
            cycle_rev.reverse()
            return cycle_rev
    raise StructureError("positive cycle detected but not recoverable")


def _best_cycle_ratio(g: PrecedenceGraph, cycle: list[int]) -> float:
    """Exact max W/D over parallel-arc choices along a node cycle."""
    hops: list[list[Arc]] = []
    adj = g.out_arcs()
    for idx, u in enumerate(cycle):
        v = cycle[(idx + 1) % len(cycle)]
        cand = [arc for arc in adj[u] if arc.dst == v]
        if not cand:
            raise StructureError("cycle references a missing arc")
        hops.append(cand)

    combos = 1
    for h in hops:
        combos *= len(h)
        if combos > 4096:
            break
    if combos > 4096:
        w = sum(max(h, key=lambda a: a.weight).weight for h in hops)
        d = sum(max(h, key=lambda a: a.weight).duration for h in hops)
        return w / d if d > 0 else (np.inf if w > 0 else -np.inf)

    best = -np.inf

    def rec(i: int, w: float, d: float):
        nonlocal best
        if i == len(hops):
            if d > 0:
                best = max(best, w / d)
            elif w > 0:
                best = np.inf
            return
        for arc in hops[i]:
            rec(i + 1, w + arc.weight, d + arc.duration)

    rec(0, 0.0, 0.0)
    return best


def max_cycle_ratio(g: PrecedenceGraph, tol: float = 1e-9) -> tuple[float, list[int]]:
    """Maximum cycle ratio max_c W(c)/D(c) with an attaining cycle.

    Parametric scheme: the test "exists a cycle with W - mu D > 0" (Bellman-
    Ford positive-cycle detection) brackets mu*; each witness cycle's exact
    ratio becomes the next test point, so the iteration climbs through the
    finite set of elementary-cycle ratios and terminates on the maximizer.
    """
    if not g.arcs:
        raise StructureError("empty graph has no cycles")
    if not graph_strongly_connected(g):
        raise StructureError("precedence graph is not strongly connected")

    zero_dur = PrecedenceGraph(g.n, [arc for arc in g.arcs if arc.duration == 0])
    if zero_dur.arcs and _positive_cycle(zero_dur, 0.0) is not None:
        raise UnboundedError("positive-weight cycle of zero total duration")

    wmin = min(arc.weight for arc in g.arcs)
    lo = g.n * min(wmin, 0.0) - 1.0

    cycle = _positive_cycle(g, lo)
    if cycle is None:
        raise StructureError("no cycle of positive total duration found")
    ratio = _best_cycle_ratio(g, cycle)
    best_cycle = cycle
    for _ in range(10_000):
        if not np.isfinite(ratio):
            raise UnboundedError("cycle ratio unbounded above")
        nxt = _positive_cycle(g, ratio + tol * 1e-3)
        if nxt is None:
            break
        r2 = _best_cycle_ratio(g, nxt)
        if r2 <= ratio + tol * 1e-3:
            break
        ratio, best_cycle = r2, nxt
    else:
        raise ConvergenceError("cycle-ratio iteration did not settle")
    return ratio, _canonical_cycle(best_cycle)


def _canonical_cycle(cycle: list[int]) -> list[int]:
    """Rotate so the smallest node comes first (deterministic output)."""
    k = cycle.index(min(cycle))
    return cycle[k:] + cycle[:k]


def enumerate_cycle_ratios(
    g: PrecedenceGraph, max_nodes: int = 10
) -> list[tuple[float, list[int]]]:
    """All elementary cycles with their W/D ratios (brute-force oracle).

    One entry per node sequence; parallel arcs collapse to the best ratio.
    Zero-duration cycles get ratio +-inf by weight sign.
    """
    if g.n > max_nodes:
        raise SizeLimitError(f"graph has {g.n} > {max_nodes} nodes")
    adj = g.out_arcs()
    results: dict[tuple[int, ...], float] = {}
    path: list[int] = []
    on_path = [False] * g.n

    def dfs(start: int, u: int):
        for arc in adj[u]:
            v = arc.dst
            if v == start:
                key = tuple(path)
                if key not in results:
                    results[key] = _best_cycle_ratio(g, list(key))
            elif v > start and not on_path[v]:
                on_path[v] = True
                path.append(v)
                dfs(start, v)
                path.pop()
                on_path[v] = False

    for s in range(g.n):
        path = [s]
        on_path = [False] * g.n
        on_path[s] = True
        dfs(s, s)

    out = [(ratio, list(key)) for key, ratio in results.items()]
    out.sort(key=lambda t: (-t[0], t[1]))
    return out


def kleene_star(m: TropicalMatrix, tol: float = 1e-9) -> TropicalMatrix:
    """Max-plus closure e + M + M^2 + ... (requires no positive cycle)."""
    n = m.shape[0]
    s = TropicalMatrix.identity(n) + m
    for _ in range(max(1, int(np.ceil(np.log2(max(n, 2)))))):
        s = s @ s
    if np.any(np.diag(s.a) > tol):
        raise UnboundedError("positive cycle: Kleene star diverges")
    return s


def generalized_eigenvector(
    a: TropicalPolyMatrix, mu: float, tol: float = 1e-6
) -> np.ndarray:
    """Finite vector v with A(-mu) (x) v = v.

    Taken as the column of the Kleene star of B = A(-mu) at a node on the
    critical cycle; validity is certified by the residual check.
    """
    if not is_irreducible(a):
        raise StructureError("matrix is not irreducible")
    b = a.evaluate(-mu)
    _, cycle = max_cycle_ratio(build_precedence_graph(a))
    crit = cycle[0]
    # star computed by bounded squaring; the float mu leaves at most a
    # ~1e-12 positive excess on critical cycles, which bounded squaring
    # cannot amplify beyond the residual tolerance
    star = TropicalMatrix.identity(a.n) + b
    for _ in range(max(1, int(np.ceil(np.log2(max(a.n, 2)))))):
        star = star @ star
    v = star.a[:, crit].copy()
    if np.any(np.isneginf(v)):
        raise StructureError("eigenvector has -inf components")
    residual = float(np.max(np.abs(b.vecmul(v) - v)))
    if residual > tol:
        raise ConvergenceError(f"eigenvector residual {residual:.3e} > {tol:.1e}")
    return v


def _zero_duration_order(a: TropicalPolyMatrix) -> list[int]:
    """Topological order of the A_0 support graph (x_j needs current x_i iff (A_0)_{ji} != eps)."""
    a0 = a.coeffs[0]
    n = a.n
    succ: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for j in range(n):
        for i in np.nonzero(~np.isneginf(a0[j]))[0]:
            succ[int(i)].append(j)
            indeg[j] += 1
    queue = deque(sorted(i for i in range(n) if indeg[i] == 0))
    order = []
    while queue:
        u = queue.popleft()
        order.append(u)
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    if len(order) != n:
        raise ImplicitCycleError("duration-0 dependencies form a cycle")
    return order


def simulate_maxplus(
    a: TropicalPolyMatrix, history, k_steps: int
) -> np.ndarray:
    """Iterate x^k = A(g) x^k for k_steps steps.

    ``history`` holds the most recent states in chronological order
    (history[-1] is x^0) and must cover the polynomial degree.  Duration-0
    terms are resolved within each step in topological order of the A_0
    support graph.  Returns x^0 .. x^K, shape (k_steps + 1, n).
    """
    hist = np.atleast_2d(np.asarray(history, dtype=float))
    p = max(a.degree, 1)
    if hist.shape[0] < a.degree:
        raise ValueError(f"history must hold at least degree={a.degree} states")
    if hist.shape[1] != a.n:
        raise DimensionError("history width does not match matrix size")
    order = _zero_duration_order(a)
    a0 = a.coeffs[0]
    n = a.n

    traj = np.empty((k_steps + 1, n))
    traj[0] = hist[-1]
    past = [hist[i].copy() for i in range(-min(p, hist.shape[0]), 0)]
    while len(past) < p:
        past.insert(0, past[0].copy())

    a0_rows = [np.nonzero(~np.isneginf(a0[j]))[0] for j in range(n)]
    for k in range(1, k_steps + 1):
        x = np.full(n, TROPICAL_ZERO)
        for l in range(1, a.degree + 1):
            np.maximum(x, (a.coeffs[l] + past[-l][None, :]).max(axis=1), out=x)
        for j in order:
            row = a0_rows[j]
            if row.size:
                cand = (a0[j, row] + x[row]).max()
                if cand > x[j]:
                    x[j] = cand
        if np.any(np.isneginf(x)):
            raise StructureError("a state component received no contribution")
        traj[k] = x
        past.append(x)
        past.pop(0)
    return traj


def trajectory_growth(traj: np.ndarray) -> tuple[float, float]:
    """(mu_estimate, spread) from the second half of a trajectory."""
    k = traj.shape[0] - 1
    half = k // 2
    if half < 1:
        raise ValueError("trajectory too short")
    rates = (traj[k] - traj[half]) / (k - half)
    return float(np.mean(rates)), float(np.max(rates) - np.min(rates))

"""Transversal rearrangement of sampled eigenvalue branches.

Sorted branches lambda_1 <= ... <= lambda_m are only continuous where
eigenvalues cross. At a node where a cluster K = {k, ..., k+n-1} has p-value
p >= 1, the branch leaving index j to the right continues index
2k+n-1-j to the left, for the p outermost pairs. The relabeled branches then
have matching left and right derivatives.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .hadamard import Tolerances, detect_clusters, sensitivity
from .assemble import assemble_forms

__all__ = [
    "CurveGrid",
    "SwapEvent",
    "RearrangementPlan",
    "GridTooCoarseError",
    "PlanMismatchError",
    "cluster_p_value",
    "transversal_rearrange",
    "apply_plan",
    "localize_crossings",
    "sample_curves",
    "mesh_node_evaluator",
    "grid_to_csv",
    "plan_to_json",
]


class GridTooCoarseError(ValueError):
    def __init__(self, first, second):
        self.nodes = (first, second)
        super().__init__(f"swap events at adjacent nodes {first} and {second} share a cluster; refine the grid")


class PlanMismatchError(ValueError):
    pass


def _opt(a):
    return None if a is None else np.asarray(a, float)


@dataclass(frozen=True, eq=False)
class CurveGrid:
    """Branch samples: arrays of shape (T, m) over the strictly increasing ``ts``."""

    ts: np.ndarray
    values: np.ndarray
    right: np.ndarray
    left: np.ndarray
    second_right: np.ndarray | None = None
    second_left: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "ts", np.asarray(self.ts, float))
        for name in ("values", "right", "left", "second_right", "second_left"):
            object.__setattr__(self, name, _opt(getattr(self, name)))
        T = len(self.ts)
        if T and np.any(np.diff(self.ts) <= 0):
            raise ValueError("grid times must be strictly increasing")
        shape = self.values.shape
        if len(shape) != 2 or shape[0] != T:
            raise ValueError(f"values must have shape (T, m) with T={T}, got {shape}")
        for name in ("right", "left", "second_right", "second_left"):
            a = getattr(self, name)
            if a is not None and a.shape != shape:
                raise ValueError(f"{name} has shape {a.shape}, expected {shape}")

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.values, axis=1) >= 0))

    def insert(self, t, row) -> "CurveGrid":
        i = int(np.searchsorted(self.ts, t))
        def ins(a, r):
            return None if a is None else np.insert(a, i, r, axis=0)
        vals, right, left, sr, sl = row
        return CurveGrid(np.insert(self.ts, i, t), ins(self.values, vals), ins(self.right, right),
                         ins(self.left, left), ins(self.second_right, sr), ins(self.second_left, sl))


@dataclass(frozen=True)
class SwapEvent:
    node: int
    k: int
    n: int
    p: int
    t: float

    def pairs(self):
        """1-based index pairs exchanged at this event."""
        return [(j, 2 * self.k + self.n - 1 - j) for j in range(self.k, self.k + self.p)]


@dataclass(frozen=True, eq=False)
class RearrangementPlan:
    """``branch_map[i, L]`` is the sorted index (0-based) carried by label L
    on the right of node i. The left side of node i uses row i-1."""

    swap_events: list
    branch_map: np.ndarray
    ts: np.ndarray
    grid: CurveGrid | None = field(default=None, repr=False)


def cluster_p_value(values_at_t, right_derivs_at_t, k: int, n: int, deriv_tol: float = 1e-6) -> int:
    """Number of strictly split outer derivative pairs of the cluster with entry k (1-based)."""
    d = np.asarray(right_derivs_at_t, float)
    if k < 1 or k + n - 1 > len(d) or n < 1:
        raise ValueError(f"cluster k={k}, n={n} does not fit {len(d)} branches")
    p = 0
    for j in range(k, k + n // 2):
        if d[j - 1] < d[2 * k + n - 2 - j] - deriv_tol:
            p = j - k + 1
    return p


def _events_at(values, right, cluster_tol, deriv_tol):
    out = []
    for k, n in detect_clusters(values, cluster_tol):
        if n < 2:
            continue
        p = cluster_p_value(values, right, k, n, deriv_tol)
        if p >= 1:
            out.append((k, n, p))
    return out


def transversal_rearrange(grid: CurveGrid, cluster_tol: float = 1e-8, deriv_tol: float = 1e-6,
                          curve=None) -> RearrangementPlan:
    """Plan the relabeling of sorted branches at crossing nodes.

    With ``curve`` (a node evaluator, see :func:`sample_curves`), crossings
    strictly between nodes are first located and inserted as new nodes; the
    returned plan then refers to ``plan.grid``.
    """
    if curve is not None:
        grid = localize_crossings(grid, curve, cluster_tol, deriv_tol)
    if not grid.is_sorted():
        raise ValueError("grid values must be ascending at every node")

    T, m = grid.values.shape
    events = []
    for i in range(T):
        for k, n, p in _events_at(grid.values[i], grid.right[i], cluster_tol, deriv_tol):
            events.append(SwapEvent(i, k, n, p, float(grid.ts[i])))

    for e1 in events:
        for e2 in events:
            if e2.node == e1.node + 1 and not (e1.k + e1.n <= e2.k or e2.k + e2.n <= e1.k):
                raise GridTooCoarseError(e1.node, e2.node)

    perm = np.arange(m)
    branch_map = np.empty((T, m), dtype=np.int64)
    by_node = {}
    for e in events:
        by_node.setdefault(e.node, []).append(e)
    for i in range(T):
        for e in by_node.get(i, ()):
            tau = np.arange(m)
            for a, b in e.pairs():
                tau[a - 1], tau[b - 1] = b - 1, a - 1
            perm = tau[perm]
        branch_map[i] = perm
    return RearrangementPlan(events, branch_map, grid.ts.copy(), grid)


def apply_plan(grid: CurveGrid, plan: RearrangementPlan) -> CurveGrid:
    """Materialize the relabeled branches.

    At node i, values and right-side data follow ``branch_map[i]`` while
    left-side data follow ``branch_map[i-1]``.
    """
    T, m = grid.values.shape
    if plan.branch_map.shape != (T, m) or not np.array_equal(plan.ts, grid.ts):
        raise PlanMismatchError("plan was built for a different grid")
    rows = np.arange(T)[:, None]
    right_map = plan.branch_map
    left_map = np.vstack([plan.branch_map[:1], plan.branch_map[:-1]])

    def take(a, mp):
        return None if a is None else a[rows, mp]

    return CurveGrid(grid.ts, take(grid.values, right_map), take(grid.right, right_map),
                     take(grid.left, left_map), take(grid.second_right, right_map),
                     take(grid.second_left, left_map))


def _same_cluster(values, j, tol):
    for k, n in detect_clusters(values, tol):
        if k - 1 <= j and j + 1 <= k + n - 2:
            return True
    return False


def localize_crossings(grid: CurveGrid, curve, cluster_tol: float = 1e-8, deriv_tol: float = 1e-6,
                       max_iter: int = 100) -> CurveGrid:
    """Insert nodes at crossings of adjacent sorted branches between grid nodes.

    A pair (j, j+1) is suspect on [t_i, t_{i+1}] when its gap shrinks at t_i
    and grows at t_{i+1}. The gap is piecewise linear near a crossing, so the
    search intersects the two one-sided tangent lines and falls back to
    bisection; a node is inserted only if the pair becomes a discrete
    cluster. Avoided crossings are left alone.
    """
    changed = True
    while changed:
        changed = False
        for i in range(len(grid.ts) - 1):
            for j in range(grid.m - 1):
                if _same_cluster(grid.values[i], j, cluster_tol) or _same_cluster(grid.values[i + 1], j, cluster_tol):
                    continue
                closing = grid.right[i, j + 1] - grid.right[i, j] < -deriv_tol
                opening = grid.left[i + 1, j + 1] - grid.left[i + 1, j] > deriv_tol
                if not (closing and opening):
                    continue
                row = _find_crossing(grid, i, j, curve, cluster_tol, max_iter)
                if row is not None:
                    grid = grid.insert(*row)
                    changed = True
                    break
            if changed:
                break
    return grid


def _find_crossing(grid, i, j, curve, cluster_tol, max_iter):
    a, b = grid.ts[i], grid.ts[i + 1]
    ga = grid.values[i, j + 1] - grid.values[i, j]
    sa = grid.right[i, j + 1] - grid.right[i, j]
    gb = grid.values[i + 1, j + 1] - grid.values[i + 1, j]
    sb = grid.left[i + 1, j + 1] - grid.left[i + 1, j]
    for _ in range(max_iter):
        # tangent lines g_a + s_a (t - a) and g_b + s_b (t - b) meet at:
        denom = sb - sa
        t = (ga - gb + sb * b - sa * a) / denom if denom > 0 else 0.5 * (a + b)
        width = b - a
        if not (a + 0.01 * width < t < b - 0.01 * width):
            t = 0.5 * (a + b)
        row = curve(t)
        vals, right, left = row[0], row[1], row[2]
        if _same_cluster(vals, j, cluster_tol):
            return t, row
        g = vals[j + 1] - vals[j]
        if right[j + 1] - right[j] < 0:
            a, ga, sa = t, g, right[j + 1] - right[j]
        else:
            b, gb, sb = t, g, left[j + 1] - left[j]
        if b - a <= 4 * np.finfo(float).eps * max(1.0, abs(a), abs(b)):
            return None
    return None


def sample_curves(evaluate, ts) -> CurveGrid:
    """Evaluate ``evaluate(t) -> (values, right, left, second_right, second_left)`` on a grid."""
    rows = [evaluate(float(t)) for t in ts]
    cols = list(zip(*rows))
    arrs = [None if any(c is None for c in col) else np.array(col, float) for col in cols]
    while len(arrs) < 5:
        arrs.append(None)
    return CurveGrid(np.asarray(ts, float), *arrs)


def mesh_node_evaluator(mesh, fam, m: int, tolerances: Tolerances | None = None):
    """Node evaluator for a deformed mesh: first m sorted eigenvalues with
    unilateral first and second derivatives."""
    tol = tolerances or Tolerances()

    def evaluate(t):
        rep = sensitivity(assemble_forms(mesh, fam, t), m, tol)
        return (rep.eigenvalues[:m], rep.right_first()[:m], rep.left_first()[:m],
                rep.right_second()[:m], rep.left_second()[:m])

    return evaluate


def grid_to_csv(grid: CurveGrid) -> str:
    m = grid.m
    header = (["t"] + [f"branch_{j}" for j in range(1, m + 1)]
              + [f"dbranch_{j}" for j in range(1, m + 1)]
              + [f"dbranch_left_{j}" for j in range(1, m + 1)])
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for i, t in enumerate(grid.ts):
        row = [t, *grid.values[i], *grid.right[i], *grid.left[i]]
        buf.write(",".join(f"{x:.17g}" for x in row) + "\n")
    return buf.getvalue()


def plan_to_json(plan: RearrangementPlan, **kwargs) -> str:
    return json.dumps({
        "swap_events": [
            {"node": e.node, "t": e.t, "k": e.k, "n": e.n, "p": e.p, "pairs": e.pairs()}
            for e in plan.swap_events
        ],
        "ts": [float(t) for t in plan.ts],
    }, **kwargs)

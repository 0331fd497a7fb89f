import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hadamard_eig.rearrange import (CurveGrid, GridTooCoarseError, PlanMismatchError, SwapEvent, apply_plan,
                                    cluster_p_value, grid_to_csv, localize_crossings, plan_to_json,
                                    sample_curves, transversal_rearrange)

PI2 = np.pi ** 2


def test_p_value_examples():
    assert cluster_p_value([5.0, 5.0], [-8 * PI2, -2 * PI2], 1, 2) == 1
    assert cluster_p_value([5.0, 5.0], [5.0, 5.0], 1, 2) == 0
    assert cluster_p_value([0, 0, 0], [1.0, 2.0, 3.0], 1, 3) == 1
    assert cluster_p_value([0] * 4, [1.0, 2.0, 3.0, 4.0], 1, 4) == 2
    assert cluster_p_value([0] * 4, [1.0, 1.0, 2.0, 2.0], 1, 4) == 2
    assert cluster_p_value([0] * 4, [1.0, 2.0, 2.0, 2.0], 1, 4) == 1


def test_p_value_rejects_bad_cluster():
    with pytest.raises(ValueError):
        cluster_p_value([0, 0], [1, 2], 2, 2)


def test_swap_event_pairs():
    assert SwapEvent(0, 2, 2, 1, 0.0).pairs() == [(2, 3)]
    assert SwapEvent(0, 1, 4, 2, 0.0).pairs() == [(1, 4), (2, 3)]


def _x_grid(ts):
    """Two lines 1 + t and 1 - t, sampled as sorted branches with one-sided slopes."""
    ts = np.asarray(ts, float)
    vals = np.column_stack([1 - np.abs(ts), 1 + np.abs(ts)])
    right = np.where(ts[:, None] < 0, [1.0, -1.0], [-1.0, 1.0])
    left = np.where(ts[:, None] <= 0, [1.0, -1.0], [-1.0, 1.0])
    return CurveGrid(ts, vals, right, left)


def _x_eval(t):
    g = _x_grid([t])
    return g.values[0], g.right[0], g.left[0], None, None


def test_crossing_lines():
    grid = _x_grid(np.linspace(-1, 1, 5))
    plan = transversal_rearrange(grid)
    assert [(e.node, e.k, e.n, e.p) for e in plan.swap_events] == [(2, 1, 2, 1)]
    out = apply_plan(grid, plan)
    assert np.allclose(out.values[:, 0], 1 + grid.ts)
    assert np.allclose(out.values[:, 1], 1 - grid.ts)
    assert np.array_equal(out.left, out.right)


def test_no_events_without_clusters():
    ts = np.linspace(0, 1, 6)
    vals = np.column_stack([ts, ts + 1, ts + 3])
    d = np.ones_like(vals)
    plan = transversal_rearrange(CurveGrid(ts, vals, d, d))
    assert plan.swap_events == []
    assert np.array_equal(plan.branch_map, np.tile(np.arange(3), (6, 1)))


def test_tangential_cluster_has_no_event():
    ts = np.linspace(-1, 1, 5)
    vals = np.column_stack([1 - ts ** 2, 1 + ts ** 2])
    right = np.column_stack([-2 * ts, 2 * ts])
    assert transversal_rearrange(CurveGrid(ts, vals, right, right)).swap_events == []


def test_apply_twice_restores_sorted_values():
    grid = _x_grid(np.linspace(-1, 1, 5))
    plan = transversal_rearrange(grid)
    twice = apply_plan(apply_plan(grid, plan), plan)
    assert np.array_equal(twice.values, grid.values)


def test_plan_mismatch():
    grid = _x_grid(np.linspace(-1, 1, 5))
    plan = transversal_rearrange(grid)
    with pytest.raises(PlanMismatchError):
        apply_plan(_x_grid(np.linspace(-1, 1, 7)), plan)


def test_adjacent_events_raise():
    ts = np.array([0.0, 1.0])
    vals = np.array([[1.0, 1.0], [2.0, 2.0]])
    d = np.array([[0.0, 1.0], [0.0, 1.0]])
    with pytest.raises(GridTooCoarseError) as err:
        transversal_rearrange(CurveGrid(ts, vals, d, d))
    assert err.value.nodes == (0, 1)


def test_two_node_grid_single_event():
    ts = np.array([0.0, 1.0])
    vals = np.array([[1.0, 1.0], [0.0, 2.0]])
    right = np.array([[-1.0, 1.0], [-1.0, 1.0]])
    left = np.array([[1.0, -1.0], [-1.0, 1.0]])
    plan = transversal_rearrange(CurveGrid(ts, vals, right, left))
    assert len(plan.swap_events) == 1


def test_localize_inserts_crossing():
    ts = np.linspace(-1, 1, 4)  # 0 is not a node
    grid = _x_grid(ts)
    plan = transversal_rearrange(grid, curve=_x_eval)
    assert len(plan.grid.ts) == 5
    assert abs(plan.swap_events[0].t) <= 1e-12
    out = apply_plan(plan.grid, plan)
    assert np.allclose(out.values[:, 0], 1 + plan.grid.ts)


def test_localize_leaves_avoided_crossing():
    # gap sqrt(t^2 + 0.01) never closes
    def ev(t):
        g = np.sqrt(t * t + 0.01)
        d = t / g
        return np.array([-g, g]), np.array([-d, d]), np.array([-d, d]), None, None
    grid = sample_curves(ev, np.linspace(-1, 1, 4))
    assert len(localize_crossings(grid, ev).ts) == 4


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10_000))
def test_rearrangement_preserves_multisets(m, seed):
    rng = np.random.default_rng(seed)
    ts = np.linspace(-1, 1, 9)
    slopes = rng.permutation(np.arange(m, dtype=float)) - m / 2
    lines = 1.0 + slopes[None, :] * ts[:, None]
    order = np.argsort(lines, axis=1, kind="stable")
    vals = np.take_along_axis(lines, order, axis=1)
    # all lines meet at t = 0 (node 4)
    right = np.where(ts[:, None] < 0, np.sort(slopes)[::-1], np.sort(slopes))
    left = np.where(ts[:, None] <= 0, np.sort(slopes)[::-1], np.sort(slopes))
    grid = CurveGrid(ts, vals, right, left)
    plan = transversal_rearrange(grid)
    out = apply_plan(grid, plan)
    assert np.array_equal(np.sort(out.values, axis=1), vals)
    assert np.allclose(out.left, out.right)
    assert np.allclose(np.sort(out.values[0]), np.sort(lines[0]))
    # each rearranged branch is one straight line
    for j in range(m):
        assert np.allclose(np.diff(out.values[:, j], 2), 0)


def test_curvegrid_validation():
    with pytest.raises(ValueError):
        CurveGrid([0.0, 0.0], np.zeros((2, 1)), np.zeros((2, 1)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        CurveGrid([0.0, 1.0], np.zeros((2, 1)), np.zeros((3, 1)), np.zeros((2, 1)))


def test_csv_and_json_outputs():
    grid = _x_grid(np.linspace(-1, 1, 3))
    plan = transversal_rearrange(grid)
    lines = grid_to_csv(grid).splitlines()
    assert lines[0] == "t,branch_1,branch_2,dbranch_1,dbranch_2,dbranch_left_1,dbranch_left_2"
    assert len(lines) == 4
    data = json.loads(plan_to_json(plan))
    assert data["swap_events"] == [{"node": 1, "t": 0.0, "k": 1, "n": 2, "p": 1, "pairs": [[1, 2]]}]

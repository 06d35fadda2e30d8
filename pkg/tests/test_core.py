"""Grid, projection, trajectory, and quadrature behavior."""

import numpy as np
import pytest

from enoc.core import (
    ControlSet,
    ControlTrajectory,
    CostWeights,
    TimeGrid,
    l2_norm_time,
    project_onto_control_set,
    sup_norm_time,
)


def test_grid_nodes_and_interleaving():
    grid = TimeGrid(horizon=2.0, steps=8)
    assert grid.nodes[0] == 0.0 and grid.nodes[-1] == 2.0
    assert np.allclose(np.diff(grid.nodes), grid.h)
    # half nodes strictly interleave the nodes
    assert np.all(grid.half_nodes > grid.nodes[:-1])
    assert np.all(grid.half_nodes < grid.nodes[1:])
    assert grid.refined.shape == (17,)
    assert grid.quarter.shape == (33,)


def test_grid_rejects_degenerate():
    with pytest.raises(ValueError):
        TimeGrid(horizon=1.0, steps=1)
    with pytest.raises(ValueError):
        TimeGrid(horizon=0.0, steps=10)


def test_projection_identity_inside_box():
    box = ControlSet(lower=np.array([-1.0, -1.0]), upper=np.array([1.0, 1.0]))
    v = np.array([0.3, -0.7])
    assert np.array_equal(project_onto_control_set(v, box), v)


def test_projection_clamps_componentwise():
    box = ControlSet(lower=np.array([-1.0, -1.0]), upper=np.array([1.0, 1.0]))
    assert np.array_equal(
        project_onto_control_set(np.array([2.0, -3.0]), box), np.array([1.0, -1.0])
    )


def test_projection_is_nearest_point():
    # brute force: the projection beats 1000 random points of the box
    rng = np.random.default_rng(42)
    box = ControlSet(lower=np.array([-1.0, 0.0, -2.0]), upper=np.array([1.0, 0.5, -1.0]))
    for _ in range(20):
        v = rng.uniform(-4, 4, size=3)
        r = project_onto_control_set(v, box)
        candidates = box.sample(rng, (1000,))
        d_r = np.linalg.norm(r - v)
        d_q = np.linalg.norm(candidates - v, axis=1)
        assert np.all(d_r <= d_q + 1e-12)


def test_projection_idempotent():
    rng = np.random.default_rng(3)
    box = ControlSet(lower=np.array([-0.5, -1.0]), upper=np.array([0.25, 2.0]))
    v = rng.uniform(-5, 5, size=(100, 2))
    once = box.project(v)
    assert np.array_equal(box.project(once), once)


def test_empty_box_rejected():
    with pytest.raises(ValueError):
        ControlSet(lower=np.array([1.0]), upper=np.array([0.0]))


def test_l2_norm_zero_path():
    grid = TimeGrid(horizon=1.0, steps=10)
    assert l2_norm_time(np.zeros(11), grid) == 0.0


def test_l2_norm_constant_exact():
    grid = TimeGrid(horizon=4.0, steps=16)
    assert l2_norm_time(np.ones(17), grid) == pytest.approx(2.0, abs=1e-14)


def test_l2_norm_linear_ramp():
    # closed form: integral of t^2 over [0,1] is 1/3
    grid = TimeGrid(horizon=1.0, steps=1000)
    val = l2_norm_time(grid.nodes.copy(), grid)
    assert val == pytest.approx(np.sqrt(1.0 / 3.0), abs=1e-5)


def test_l2_norm_homogeneous():
    grid = TimeGrid(horizon=1.0, steps=50)
    rng = np.random.default_rng(0)
    f = rng.standard_normal((51, 3))
    assert l2_norm_time(-2.5 * f, grid) == pytest.approx(2.5 * l2_norm_time(f, grid), rel=1e-14)


def test_l2_norm_refinement_second_order():
    # trapezoid error on a smooth (non-periodic) path shrinks ~4x per doubling
    exact = np.sqrt((np.exp(2.0) - 1.0) / 2.0)  # L2 norm of e^t on [0,1]
    errs = []
    for n in (64, 128):
        grid = TimeGrid(horizon=1.0, steps=n)
        errs.append(abs(l2_norm_time(np.exp(grid.nodes), grid) - exact))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_sup_norm_cases():
    grid = TimeGrid(horizon=1.0, steps=1000)
    assert sup_norm_time(np.zeros(1001), grid) == 0.0
    spike = np.zeros(1001)
    spike[317] = 5.0
    assert sup_norm_time(spike, grid) == 5.0
    assert sup_norm_time(np.sin(2 * np.pi * grid.nodes), grid) == pytest.approx(1.0, abs=1e-5)


def test_control_trajectory_interpolation():
    grid = TimeGrid(horizon=1.0, steps=4)
    vals = np.array([[0.0], [1.0], [0.0], [1.0], [0.0]])
    u = ControlTrajectory(values=vals, grid=grid)
    # midpoint of each segment is the average of its endpoints
    assert u(0.125)[0] == pytest.approx(0.5)
    assert u(0.875)[0] == pytest.approx(0.5)
    # quarter-grid values agree with direct evaluation
    uq = u.on_quarter_grid()
    direct = u(grid.quarter)
    np.testing.assert_allclose(uq, direct, atol=1e-15)


def test_control_trajectory_stays_in_convex_box():
    rng = np.random.default_rng(1)
    grid = TimeGrid(horizon=1.0, steps=20)
    box = ControlSet(lower=np.array([-1.0, 0.0]), upper=np.array([1.0, 0.5]))
    u = ControlTrajectory(values=box.sample(rng, (21,)), grid=grid)
    assert u.in_set(box)
    t = rng.uniform(0, 1, size=200)
    vals = u(t)
    assert np.all(vals >= box.lower - 1e-12) and np.all(vals <= box.upper + 1e-12)


def test_cost_weights_validation():
    CostWeights(alpha=0.0, beta=1.0)
    with pytest.raises(ValueError):
        CostWeights(alpha=-0.1, beta=1.0)
    with pytest.raises(ValueError):
        CostWeights(alpha=1.0, beta=0.0)

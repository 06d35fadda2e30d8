"""Fixed-step RK4 solvers for the state, adjoint, and variational systems.

The forward pass integrates with step h/2 (2N classical RK4 steps), so the
stored state is 4th-order accurate at every node and half-node; its stage
times land on the quarter grid where inputs are pre-sampled, so no stage
ever interpolates an input.  The backward pass integrates with step h from
t = T down to 0 and consumes stored state/input/target values at its exact
stage times (nodes and half-nodes).

Member solves are independent; batch drivers vectorize across members and
optionally split the member axis over worker threads with a fixed
reassembly order, so results do not depend on the worker count.
"""

from __future__ import annotations

import numpy as np

from .core import AdjointPath, ControlTrajectory, CostWeights, StatePath, TimeGrid
from .errors import NonFiniteAdjointError, NonFiniteStateError
from .models import DynamicsModel, fd_input_derivative
from .parallel import run_chunked


def _input_values(omega, grid: TimeGrid) -> np.ndarray:
    vals = np.asarray(getattr(omega, "values", omega), dtype=float)
    if vals.ndim != 2 or vals.shape[0] != 4 * grid.steps + 1:
        raise ValueError(
            f"input signal must be sampled on the quarter grid "
            f"({4 * grid.steps + 1} points), got shape {vals.shape}"
        )
    return vals


def stage_dynamics(
    model: DynamicsModel,
    u: ControlTrajectory,
    inputs_q: np.ndarray,
    grid: TimeGrid,
) -> tuple[np.ndarray, np.ndarray]:
    """A and B at every quarter point for every member.

    inputs_q: (M, 4N+1, d); returns A (4N+1, M, n, n) and B (4N+1, M, n).
    """
    u_q = u.on_quarter_grid()  # (4N+1, m)
    w_q = np.swapaxes(inputs_q, 0, 1)  # (4N+1, M, d)
    t_q = grid.quarter[:, None]
    a = model.eval_A(t_q, w_q, u_q[:, None, :])
    b = model.eval_B(t_q, w_q, u_q[:, None, :])
    return a, b


def _rk4_forward(a_q: np.ndarray, b_q: np.ndarray, x0: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Integrate xdot = A x + B over 2N steps of h/2; returns (M, 2N+1, n)."""
    n_ref = 2 * grid.steps
    c = 0.5 * grid.h
    members, n = x0.shape
    out = np.empty((members, n_ref + 1, n))
    x = x0.copy()
    out[:, 0] = x
    mv = lambda a, v: np.matmul(a, v[..., None])[..., 0]
    with np.errstate(over="ignore", invalid="ignore"):  # finiteness checked by caller
        for j in range(n_ref):
            q = 2 * j
            k1 = mv(a_q[q], x) + b_q[q]
            k2 = mv(a_q[q + 1], x + (0.5 * c) * k1) + b_q[q + 1]
            k3 = mv(a_q[q + 1], x + (0.5 * c) * k2) + b_q[q + 1]
            k4 = mv(a_q[q + 2], x + c * k3) + b_q[q + 2]
            x = x + (c / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            out[:, j + 1] = x
    return out


def forward_batch(
    model: DynamicsModel,
    u: ControlTrajectory,
    inputs_q: np.ndarray,
    grid: TimeGrid,
    workers: int = 1,
) -> np.ndarray:
    """States of all members on the refined grid: (M, 2N+1, n)."""
    members = inputs_q.shape[0]

    def solve(lo: int, hi: int) -> np.ndarray:
        a_q, b_q = stage_dynamics(model, u, inputs_q[lo:hi], grid)
        x0 = model.initial_state(hi - lo)
        if model.x0_vec.shape[0] != model.dims.n:
            raise ValueError("initial state has wrong dimension")
        return _rk4_forward(a_q, b_q, x0, grid)

    x = run_chunked(solve, members, workers)
    if not np.isfinite(x).all():
        raise NonFiniteStateError(
            "forward solve overflowed; the transition bound times the horizon "
            "is too large for this grid"
        )
    return x


def forward_solve(
    model: DynamicsModel, u: ControlTrajectory, omega, grid: TimeGrid
) -> StatePath:
    """State path of a single member."""
    vals = _input_values(omega, grid)
    x = forward_batch(model, u, vals[None], grid)
    return StatePath(values=x[0], grid=grid)


def _forcing_refined(
    readout: np.ndarray, x_ref: np.ndarray, targets: np.ndarray, alpha: float
) -> np.ndarray:
    """2 alpha C^T (C x - F) at every refined point: (M, 2N+1, n)."""
    mismatch = np.einsum("oi,mki->mko", readout, x_ref) - targets
    return 2.0 * alpha * np.einsum("oi,mko->mki", readout, mismatch)


def _rk4_backward(a_ref: np.ndarray, forcing_ref: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Integrate pdot = -A^T p + forcing from p(T) = 0 down to 0.

    a_ref: (2N+1, M, n, n), forcing_ref: (M, 2N+1, n); returns (M, N+1, n).
    """
    n_steps = grid.steps
    h = grid.h
    members, _, n = forcing_ref.shape
    out = np.empty((members, n_steps + 1, n))
    p = np.zeros((members, n))
    out[:, n_steps] = p
    atv = lambda a, v: np.matmul(v[:, None, :], a)[:, 0, :]  # A^T v per member
    with np.errstate(over="ignore", invalid="ignore"):  # finiteness checked by caller
        for i in range(n_steps - 1, -1, -1):
            r0, rh, r1 = 2 * i, 2 * i + 1, 2 * i + 2
            l1 = -atv(a_ref[r1], p) + forcing_ref[:, r1]
            l2 = -atv(a_ref[rh], p - (0.5 * h) * l1) + forcing_ref[:, rh]
            l3 = -atv(a_ref[rh], p - (0.5 * h) * l2) + forcing_ref[:, rh]
            l4 = -atv(a_ref[r0], p - h * l3) + forcing_ref[:, r0]
            p = p - (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
            out[:, i] = p
    return out


def backward_batch(
    model: DynamicsModel,
    u: ControlTrajectory,
    inputs_q: np.ndarray,
    x_ref: np.ndarray,
    targets: np.ndarray,
    weights: CostWeights,
    grid: TimeGrid,
    workers: int = 1,
    stage_a: np.ndarray | None = None,
) -> np.ndarray:
    """Adjoints of all members at the nodes: (M, N+1, n).

    `stage_a` may pass the quarter-grid A from a previous forward pass to
    avoid re-evaluating the model.
    """
    members = inputs_q.shape[0]

    def solve(lo: int, hi: int) -> np.ndarray:
        if stage_a is None:
            a_q, _ = stage_dynamics(model, u, inputs_q[lo:hi], grid)
        else:
            a_q = stage_a[:, lo:hi]
        forcing = _forcing_refined(model.readout, x_ref[lo:hi], targets[lo:hi], weights.alpha)
        return _rk4_backward(a_q[::2], forcing, grid)

    p = run_chunked(solve, members, workers)
    if not np.isfinite(p).all():
        raise NonFiniteAdjointError("backward solve overflowed")
    return p


def backward_solve(
    model: DynamicsModel,
    u: ControlTrajectory,
    omega,
    x: StatePath,
    target: np.ndarray,
    weights: CostWeights,
    grid: TimeGrid,
) -> AdjointPath:
    """Adjoint path of a single member, consuming the stored state."""
    vals = _input_values(omega, grid)
    target = np.asarray(target, dtype=float)
    p = backward_batch(model, u, vals[None], x.values[None], target[None], weights, grid)
    return AdjointPath(values=p[0], grid=grid)


def _input_direction_stages(model, u_q, w_q, t_q, h_q, fd_eps=1e-6):
    """Directional (A, B) derivatives in the input at given stage times."""
    try:
        da = model.dw_A(t_q, w_q, u_q, h_q)
        db = model.dw_B(t_q, w_q, u_q, h_q)
    except NotImplementedError:
        da, db = fd_input_derivative(model, t_q, w_q, u_q, h_q, fd_eps)
    return da, db


def variational_solve_state(
    model: DynamicsModel,
    u: ControlTrajectory,
    omega,
    h_dir,
    grid: TimeGrid,
) -> np.ndarray:
    """Sensitivity of the state to an input perturbation direction.

    Solves zdot = A z + (dA/dw [h]) x + dB/dw [h] with z(0) = 0 jointly
    with the state (so the forcing uses exact stage states); returns z on
    the refined grid, (2N+1, n).  Linear in h.
    """
    w_q = _input_values(omega, grid)
    h_q = _input_values(h_dir, grid)
    u_q = u.on_quarter_grid()
    t_q = grid.quarter
    a_q = model.eval_A(t_q, w_q, u_q)
    b_q = model.eval_B(t_q, w_q, u_q)
    da_q, db_q = _input_direction_stages(model, u_q, w_q, t_q, h_q)

    n_ref = 2 * grid.steps
    c = 0.5 * grid.h
    n = model.dims.n
    z_out = np.empty((n_ref + 1, n))
    x = model.initial_state(1)[0]
    z = np.zeros(n)  # constant initial map: zero input sensitivity
    z_out[0] = z
    for j in range(n_ref):
        q = 2 * j

        def rhs(qi, xs, zs):
            kx = a_q[qi] @ xs + b_q[qi]
            kz = a_q[qi] @ zs + da_q[qi] @ xs + db_q[qi]
            return kx, kz

        k1x, k1z = rhs(q, x, z)
        k2x, k2z = rhs(q + 1, x + 0.5 * c * k1x, z + 0.5 * c * k1z)
        k3x, k3z = rhs(q + 1, x + 0.5 * c * k2x, z + 0.5 * c * k2z)
        k4x, k4z = rhs(q + 2, x + c * k3x, z + c * k3z)
        x = x + (c / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        z = z + (c / 6.0) * (k1z + 2 * k2z + 2 * k3z + k4z)
        z_out[j + 1] = z
    if not np.isfinite(z_out).all():
        raise NonFiniteStateError("state variational solve overflowed")
    return z_out


def adjoint_on_refined(
    model: DynamicsModel,
    u: ControlTrajectory,
    omega,
    x_ref: np.ndarray,
    p_nodes: np.ndarray,
    target: np.ndarray,
    weights: CostWeights,
    grid: TimeGrid,
) -> np.ndarray:
    """Adjoint values at nodes and half-nodes, (2N+1, n).

    Half-node values are filled by cubic Hermite interpolation using the
    adjoint equation for the endpoint slopes (4th-order accurate midpoints).
    """
    w_r = _input_values(omega, grid)[::2]
    u_r = u.on_refined_grid()
    t_r = grid.refined
    a_nodes = model.eval_A(t_r[::2], w_r[::2], u_r[::2])
    mismatch = np.einsum("oi,ki->ko", model.readout, x_ref[::2]) - target[::2]
    forcing = 2.0 * weights.alpha * np.einsum("oi,ko->ki", model.readout, mismatch)
    pdot = -np.einsum("kji,kj->ki", a_nodes, p_nodes) + forcing
    h = grid.h
    p_half = 0.5 * (p_nodes[:-1] + p_nodes[1:]) + (h / 8.0) * (pdot[:-1] - pdot[1:])
    out = np.empty((2 * grid.steps + 1, model.dims.n))
    out[::2] = p_nodes
    out[1::2] = p_half
    return out


def variational_solve_adjoint(
    model: DynamicsModel,
    u: ControlTrajectory,
    omega,
    x: np.ndarray,
    p: np.ndarray,
    z_state: np.ndarray,
    h_dir,
    df_dir: np.ndarray,
    target: np.ndarray,
    weights: CostWeights,
    grid: TimeGrid,
) -> np.ndarray:
    """Sensitivity of the adjoint to an input perturbation direction.

    Solves, backward from z(T) = 0,

        zdot = -A^T z - (dA/dw [h])^T p + 2 alpha C^T (C z_state - dF/dw [h])

    where x, p, z_state come from the corresponding solves and df_dir is
    the directional derivative of the target path on the refined grid.
    Returns z at the nodes, (N+1, n).
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    z_state = np.asarray(z_state, dtype=float)
    df_dir = np.asarray(df_dir, dtype=float)
    w_r = _input_values(omega, grid)[::2]
    h_r = _input_values(h_dir, grid)[::2]
    u_r = u.on_refined_grid()
    t_r = grid.refined

    a_r = model.eval_A(t_r, w_r, u_r)
    da_r, _ = _input_direction_stages(model, u_r, w_r, t_r, h_r)
    p_r = adjoint_on_refined(model, u, omega, x, p, target, weights, grid)

    mismatch = np.einsum("oi,ki->ko", model.readout, z_state) - df_dir
    forcing = -np.einsum("kji,kj->ki", da_r, p_r)
    forcing += 2.0 * weights.alpha * np.einsum("oi,ko->ki", model.readout, mismatch)

    zp = np.zeros(model.dims.n)
    out = np.empty((grid.steps + 1, model.dims.n))
    out[-1] = zp
    h = grid.h
    atv = lambda a, v: a.T @ v
    for i in range(grid.steps - 1, -1, -1):
        r0, rh, r1 = 2 * i, 2 * i + 1, 2 * i + 2
        l1 = -atv(a_r[r1], zp) + forcing[r1]
        l2 = -atv(a_r[rh], zp - 0.5 * h * l1) + forcing[rh]
        l3 = -atv(a_r[rh], zp - 0.5 * h * l2) + forcing[rh]
        l4 = -atv(a_r[r0], zp - h * l3) + forcing[r0]
        zp = zp - (h / 6.0) * (l1 + 2 * l2 + 2 * l3 + l4)
        out[i] = zp
    if not np.isfinite(out).all():
        raise NonFiniteAdjointError("adjoint variational solve overflowed")
    return out

"""Direct discretize-then-optimize reference used as an independent oracle.

The cost is treated as a plain function of the stacked control node values:
its exact gradient is obtained by reverse-mode differentiation of the RK4
recurrence and the trapezoid quadrature (no Hamiltonian, no adjoint ODE),
and the optimizer is projected gradient descent run to a tight fixed-point
residual.  Agreement of this route with the trainer is an end-to-end check
of the adjoint machinery.
"""

from __future__ import annotations

import numpy as np

from enoc.core import ControlSet, CostWeights, TimeGrid
from enoc.ensemble import EnsembleBatch
from enoc.models import DynamicsModel


def _quarter_controls(u_values: np.ndarray, grid: TimeGrid) -> np.ndarray:
    n = grid.steps
    q = np.arange(4 * n + 1)
    i = np.minimum(q // 4, n - 1)
    r = (q - 4 * i)[:, None].astype(float)
    return ((4.0 - r) * u_values[i] + r * u_values[i + 1]) / 4.0


def direct_cost_and_grad(
    model: DynamicsModel,
    u_values: np.ndarray,           # (N+1, m)
    batch: EnsembleBatch,
    weights: CostWeights,
    grid: TimeGrid,
) -> tuple[float, np.ndarray]:
    """Cost and its exact gradient with respect to the control node values."""
    n_steps = 2 * grid.steps
    c = 0.5 * grid.h
    members = batch.members
    m = u_values.shape[1]
    u_q = _quarter_controls(u_values, grid)
    w_q = np.swapaxes(batch.inputs, 0, 1)          # (4N+1, M, d)
    t_q = grid.quarter[:, None]
    a_q = model.eval_A(t_q, w_q, u_q[:, None, :])  # (4N+1, M, n, n)
    b_q = model.eval_B(t_q, w_q, u_q[:, None, :])

    mv = lambda a, v: np.matmul(a, v[..., None])[..., 0]
    x = model.initial_state(members)
    xs = [x]                                        # states at refined points
    stages = []                                     # per-step stage inputs
    for j in range(n_steps):
        q = 2 * j
        k1 = mv(a_q[q], x) + b_q[q]
        x2 = x + 0.5 * c * k1
        k2 = mv(a_q[q + 1], x2) + b_q[q + 1]
        x3 = x + 0.5 * c * k2
        k3 = mv(a_q[q + 1], x3) + b_q[q + 1]
        x4 = x + c * k3
        k4 = mv(a_q[q + 2], x4) + b_q[q + 2]
        x = x + (c / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        xs.append(x)
        stages.append((x2, x3, x4))
    x_ref = np.stack(xs, axis=1)                    # (M, 2N+1, n)

    node_w = grid.node_weights()
    mismatch = np.einsum("oi,mki->mko", model.readout, x_ref[:, ::2]) - batch.targets[:, ::2]
    fit = np.mean(np.sum(mismatch * mismatch, axis=-1), axis=0)
    penalty = np.sum(u_values * u_values, axis=-1)
    cost = float(np.sum(node_w * (weights.alpha * fit + weights.beta * penalty)))

    # cost cotangents of the stored states (only nodes contribute directly)
    xbar_direct = np.zeros_like(x_ref)
    xbar_direct[:, ::2] = (
        (2.0 * weights.alpha / members)
        * node_w[None, :, None]
        * np.einsum("oi,mko->mki", model.readout, mismatch)
    )

    u_q_bar = np.zeros((4 * grid.steps + 1, m))
    xbar = xbar_direct[:, n_steps].copy()

    def pair(qi: int, x_in: np.ndarray, kbar: np.ndarray) -> None:
        g = model.pairing_grad(t_q[qi], w_q[qi], u_q[qi], x_in, kbar)
        u_q_bar[qi] += np.sum(g, axis=0)

    atv = lambda a, v: np.matmul(v[:, None, :], a)[:, 0, :]
    for j in range(n_steps - 1, -1, -1):
        q = 2 * j
        x2, x3, x4 = stages[j]
        x_j = x_ref[:, j]
        k1bar = (c / 6.0) * xbar
        k2bar = (c / 3.0) * xbar
        k3bar = (c / 3.0) * xbar
        k4bar = (c / 6.0) * xbar
        xbar_j = xbar.copy()

        pair(q + 2, x4, k4bar)
        x4bar = atv(a_q[q + 2], k4bar)
        xbar_j += x4bar
        k3bar = k3bar + c * x4bar

        pair(q + 1, x3, k3bar)
        x3bar = atv(a_q[q + 1], k3bar)
        xbar_j += x3bar
        k2bar = k2bar + 0.5 * c * x3bar

        pair(q + 1, x2, k2bar)
        x2bar = atv(a_q[q + 1], k2bar)
        xbar_j += x2bar
        k1bar = k1bar + 0.5 * c * x2bar

        pair(q, x_j, k1bar)
        xbar_j += atv(a_q[q], k1bar)

        xbar = xbar_j + xbar_direct[:, j]

    # scatter quarter-point control cotangents onto the nodes
    grad = np.zeros_like(u_values)
    n = grid.steps
    for q in range(4 * n + 1):
        i = min(q // 4, n - 1)
        r = q - 4 * i
        grad[i] += (4 - r) / 4.0 * u_q_bar[q]
        grad[i + 1] += r / 4.0 * u_q_bar[q]
    grad += 2.0 * weights.beta * node_w[:, None] * u_values
    return cost, grad


def direct_pgd(
    model: DynamicsModel,
    u0_values: np.ndarray,
    batch: EnsembleBatch,
    weights: CostWeights,
    grid: TimeGrid,
    control_set: ControlSet,
    tol: float = 1e-12,
    max_iters: int = 20_000,
) -> tuple[np.ndarray, float]:
    """Projected gradient descent on the stacked node values to stationarity.

    The step is 1/L with L estimated by power iteration on the gradient map
    (exact for cost functions quadratic in the control).
    """
    u = control_set.project(np.asarray(u0_values, dtype=float).copy())
    _, g0 = direct_cost_and_grad(model, u, batch, weights, grid)

    rng = np.random.default_rng(12345)
    v = rng.standard_normal(u.shape)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(30):
        _, g1 = direct_cost_and_grad(model, u + v, batch, weights, grid)
        hv = g1 - g0
        lam = np.linalg.norm(hv)
        if lam == 0.0:
            break
        v = hv / lam
    step = 1.0 / max(lam, 1e-12)

    for _ in range(max_iters):
        _, g = direct_cost_and_grad(model, u, batch, weights, grid)
        cand = control_set.project(u - step * g)
        residual = np.linalg.norm(cand - u)
        u = cand
        if residual <= tol:
            break
    cost, _ = direct_cost_and_grad(model, u, batch, weights, grid)
    return u, cost

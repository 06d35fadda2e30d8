"""The ensemble control Hamiltonian and its per-node box-constrained maximizer.

At a fixed time the Hamiltonian of a control candidate u is

    H(u) = mean_w [ p . (A(t, w; u) x + B(t, w; u)) ]
           - alpha mean_w |C x - F|^2 - beta |u|^2,

with the mean over the ensemble members.  Under the certified concavity
modulus the maximizer over the control box is unique and projected gradient
ascent with step 1/ascent_lipschitz converges linearly to it.

Maximizations at distinct time nodes are independent; the batched driver
runs them simultaneously, freezing each node once its fixed-point residual
drops below tolerance (so per-node results do not depend on how nodes are
chunked across workers).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ControlSet, CostWeights
from .errors import InnerNotConverged
from .models import DynamicsModel
from .parallel import chunk_ranges, run_chunked


@dataclass(frozen=True)
class HamiltonianContext:
    """Frozen per-time data: member states, adjoints, inputs, and targets."""

    t: float
    x: np.ndarray        # (M, n)
    p: np.ndarray        # (M, n)
    w: np.ndarray        # (M, d)
    targets: np.ndarray  # (M, d_out)
    weights: CostWeights
    model: DynamicsModel

    def __post_init__(self):
        arrs = (self.x, self.p, self.w, self.targets)
        members = {a.shape[0] for a in arrs}
        if len(members) != 1:
            raise ValueError("member counts disagree across context arrays")
        if not all(np.isfinite(a).all() for a in arrs):
            raise ValueError("context entries must be finite")


def _values_at_nodes(
    model: DynamicsModel,
    t_nodes: np.ndarray,
    w: np.ndarray,
    f: np.ndarray,
    x: np.ndarray,
    p: np.ndarray,
    weights: CostWeights,
    u: np.ndarray,
) -> np.ndarray:
    """H at each node for per-node controls; arrays are (K, M, .), u is (K, m)."""
    t = t_nodes[:, None]
    uu = u[:, None, :]
    a = model.eval_A(t, w, uu)
    b = model.eval_B(t, w, uu)
    drift = np.matmul(a, x[..., None])[..., 0] + b
    pairing = np.mean(np.sum(p * drift, axis=-1), axis=-1)
    mismatch = np.einsum("oi,kmi->kmo", model.readout, x) - f
    fit = np.mean(np.sum(mismatch * mismatch, axis=-1), axis=-1)
    penalty = np.sum(u * u, axis=-1)
    return pairing - weights.alpha * fit - weights.beta * penalty


def _grad_at_nodes(model, t_nodes, w, x, p, weights, u) -> np.ndarray:
    g = model.pairing_grad(t_nodes[:, None], w, u[:, None, :], x, p)
    return np.mean(g, axis=1) - 2.0 * weights.beta * u


def hamiltonian_eval(ctx: HamiltonianContext, u: np.ndarray) -> float:
    u = np.asarray(u, dtype=float)
    return float(
        _values_at_nodes(
            ctx.model, np.array([ctx.t]), ctx.w[None], ctx.targets[None],
            ctx.x[None], ctx.p[None], ctx.weights, u[None],
        )[0]
    )


def hamiltonian_grad_u(ctx: HamiltonianContext, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return _grad_at_nodes(
        ctx.model, np.array([ctx.t]), ctx.w[None], ctx.x[None], ctx.p[None],
        ctx.weights, u[None],
    )[0]


def hamiltonian_hess_quadform(ctx: HamiltonianContext, u: np.ndarray, v: np.ndarray) -> float:
    """Quadratic form of the control Hessian along v; at most
    -concavity * |v|^2 whenever the state/adjoint bounds hold."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    d2a = ctx.model.d2u_A(ctx.t, ctx.w, u, v, v)
    d2b = ctx.model.d2u_B(ctx.t, ctx.w, u, v, v)
    term = np.matmul(d2a, ctx.x[..., None])[..., 0] + d2b
    quad = float(np.mean(np.sum(ctx.p * term, axis=-1)))
    return quad - 2.0 * ctx.weights.beta * float(v @ v)


def maximize_nodes(
    model: DynamicsModel,
    t_nodes: np.ndarray,
    w: np.ndarray,
    x: np.ndarray,
    p: np.ndarray,
    weights: CostWeights,
    u_warm: np.ndarray,
    control_set: ControlSet,
    step: float,
    tol_u: float = 1e-10,
    max_inner: int = 10_000,
    strict: bool = True,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Maximize the Hamiltonian at every node by projected gradient ascent.

    Returns (controls (K, m), last update sizes (K,), max inner iterations
    used).  Raises InnerNotConverged (with the worst node index) when a node
    exhausts max_inner above tolerance and strict is set.
    """
    if step <= 0:
        raise ValueError("ascent step must be positive")
    n_nodes = t_nodes.shape[0]

    def solve(lo: int, hi: int) -> np.ndarray:
        u = control_set.project(u_warm[lo:hi].copy())
        tn, wn, xn, pn = t_nodes[lo:hi], w[lo:hi], x[lo:hi], p[lo:hi]
        residual = np.full(hi - lo, np.inf)
        active = np.arange(hi - lo)
        iters = 0
        while active.size:
            if iters >= max_inner:
                if strict:
                    worst = active[np.argmax(residual[active])]
                    raise InnerNotConverged(
                        node=lo + int(worst), residual=float(residual[worst]),
                        max_inner=max_inner,
                    )
                break
            g = _grad_at_nodes(model, tn[active], wn[active], xn[active], pn[active],
                               weights, u[active])
            cand = control_set.project(u[active] + step * g)
            moved = np.linalg.norm(cand - u[active], axis=-1)
            u[active] = cand
            residual[active] = moved
            active = active[moved > tol_u]
            iters += 1
        return np.concatenate([u, residual[:, None], np.full((hi - lo, 1), iters)], axis=-1)

    packed = run_chunked(solve, n_nodes, workers)
    m = u_warm.shape[1]
    return packed[:, :m], packed[:, m], int(packed[:, m + 1].max())


def maximize_hamiltonian(
    ctx: HamiltonianContext,
    u_warm: np.ndarray,
    control_set: ControlSet,
    step: float,
    tol_u: float = 1e-10,
    max_inner: int = 10_000,
    strict: bool = True,
) -> np.ndarray:
    """Argmax of H over the control box, warm-started from u_warm."""
    u, _, _ = maximize_nodes(
        ctx.model, np.array([ctx.t]), ctx.w[None],
        ctx.x[None], ctx.p[None], ctx.weights,
        np.asarray(u_warm, dtype=float)[None], control_set,
        step=step, tol_u=tol_u, max_inner=max_inner, strict=strict,
    )
    return u[0]


__all__ = [
    "HamiltonianContext",
    "hamiltonian_eval",
    "hamiltonian_grad_u",
    "hamiltonian_hess_quadform",
    "maximize_hamiltonian",
    "maximize_nodes",
    "chunk_ranges",
]

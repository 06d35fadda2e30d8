"""Verification suite: Hessian sampling, finite-difference cross-checks,
and the a priori bound audit.

Everything here is a pure function over immutable run artifacts.  The
finite-difference checks pit two independent computation routes against
each other: the adjoint-based gradient against centered differences of the
cost, and the sensitivity solves against differences of perturbed-input
solves.  The certificate constants themselves live in `constants`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import (
    CertificateReport,
    compute_constants,
    readout_singular_values,
    resolve_auto_beta,
    sufficiency_thresholds,
)
from .core import ControlTrajectory, CostWeights, TimeGrid
from .dynamics import (
    backward_batch,
    forward_batch,
    variational_solve_adjoint,
    variational_solve_state,
)
from .ensemble import EnsembleBatch, InputSignal, TargetMap
from .hamiltonian import _grad_at_nodes
from .models import DynamicsModel
from .msa import _node_arrays, _solve_pair, cost_eval

__all__ = [
    "CertificateReport",
    "compute_constants",
    "sufficiency_thresholds",
    "resolve_auto_beta",
    "readout_singular_values",
    "hessian_definiteness_sampled",
    "hessian_quadform_pair",
    "fd_gradient_check",
    "variational_fd_check",
    "bounds_audit",
    "BoundsAudit",
    "HessianSample",
    "VariationalCheck",
]


@dataclass(frozen=True)
class HessianSample:
    passed: bool
    worst: float        # largest sampled quadratic-form value (want < 0)
    samples: int


def hessian_quadform_pair(
    model: DynamicsModel,
    t: float,
    w: np.ndarray,       # (M, d)
    x: np.ndarray,       # (M, n)
    p: np.ndarray,       # (M, n)
    u: np.ndarray,       # (m,)
    weights: CostWeights,
    y: np.ndarray,       # (M, n) state-space direction per member
    v: np.ndarray,       # (m,) control direction
) -> float:
    """Joint Hessian quadratic form of the node objective at one context:

    Q[y, v] = -2 alpha mean |C y|^2 + 2 mean p . (duA[v] y) - 2 beta |v|^2
              + mean p . (d2uA[v,v] x + d2uB[v,v]),

    with means over the ensemble members.
    """
    alpha, beta = weights.alpha, weights.beta
    cy = y @ model.readout.T
    q = -2.0 * alpha * float(np.mean(np.sum(cy * cy, axis=-1)))
    da = model.du_A(t, w, u, v)
    q += 2.0 * float(np.mean(np.sum(p * np.matmul(da, y[..., None])[..., 0], axis=-1)))
    q -= 2.0 * beta * float(v @ v)
    d2a = model.d2u_A(t, w, u, v, v)
    d2b = model.d2u_B(t, w, u, v, v)
    term = np.matmul(d2a, x[..., None])[..., 0] + d2b
    q += float(np.mean(np.sum(p * term, axis=-1)))
    return q


def hessian_definiteness_sampled(
    model: DynamicsModel,
    t_nodes: np.ndarray,     # (K,) sampled times
    w_nodes: np.ndarray,     # (K, M, d) member inputs at those times
    x_nodes: np.ndarray,     # (K, M, n) states at those times, from real solves
    p_nodes: np.ndarray,     # (K, M, n)
    u_nodes: np.ndarray,     # (K, m)
    weights: CostWeights,
    samples: int = 1000,
    seed: int = 0,
) -> HessianSample:
    """Sample the joint Hessian quadratic form Q[y, v] of the node objective.

    Q[y, v] = -2 alpha mean |C y|^2 + 2 mean p . (duA[v] y) - 2 beta |v|^2
              + mean p . (d2uA[v,v] x + d2uB[v,v]),

    with means over members; y is a per-member state-space direction and v a
    control direction.  Passes iff Q < 0 on every nonzero sample; the worst
    (largest) sampled value is reported.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n_ctx, members, n = x_nodes.shape
    m = u_nodes.shape[1]
    worst = -np.inf
    for _ in range(samples):
        k = int(rng.integers(n_ctx))
        y = rng.standard_normal((members, n))
        v = rng.standard_normal(m)
        q = hessian_quadform_pair(
            model, t_nodes[k], w_nodes[k], x_nodes[k], p_nodes[k], u_nodes[k],
            weights, y, v,
        )
        worst = max(worst, q)
    return HessianSample(passed=worst < 0.0, worst=worst, samples=samples)


def fd_gradient_check(
    model: DynamicsModel,
    u: ControlTrajectory,
    batch: EnsembleBatch,
    weights: CostWeights,
    grid: TimeGrid,
    directions: list[np.ndarray],
    eps: float = 1e-5,
    corrupt: bool = False,
) -> float:
    """Worst relative error between the adjoint-route directional cost
    derivative and centered differences of the cost.

    The adjoint route integrates <dJ/du, du> over time with dJ/du(t) equal
    to minus the Hamiltonian control gradient along the solution pair.
    `corrupt` scales that gradient (negative-control hook for the CLI).
    """
    x, p = _solve_pair(model, u, batch, weights, grid)
    w, _, xn, pn = _node_arrays(batch, x, p)
    grad_h = _grad_at_nodes(model, grid.nodes, w, xn, pn, weights, u.values)
    djdu = -grad_h
    if corrupt:
        djdu = 1.02 * djdu
    wts = grid.node_weights()
    worst = 0.0
    for direction in directions:
        direction = np.asarray(direction, dtype=float)
        lhs = float(np.sum(wts * np.sum(djdu * direction, axis=-1)))
        up = ControlTrajectory(values=u.values + eps * direction, grid=grid)
        dn = ControlTrajectory(values=u.values - eps * direction, grid=grid)
        rhs = (cost_eval(model, up, batch, weights, grid)
               - cost_eval(model, dn, batch, weights, grid)) / (2.0 * eps)
        scale = max(abs(lhs), abs(rhs), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


@dataclass(frozen=True)
class VariationalCheck:
    state_error: float       # sup-norm remainder / (eps * sup|h|)
    adjoint_error: float
    state_remainder: float   # raw sup-norm remainder (O(eps^2) for smooth maps)
    adjoint_remainder: float

    @property
    def worst(self) -> float:
        return max(self.state_error, self.adjoint_error)


def variational_fd_check(
    model: DynamicsModel,
    u: ControlTrajectory,
    signals: list[InputSignal],
    h_dirs: list[InputSignal],
    target_map: TargetMap,
    weights: CostWeights,
    grid: TimeGrid,
    eps: float = 1e-4,
) -> VariationalCheck:
    """Compare the sensitivity solves against perturbed-input differences.

    For each signal w and direction h, solves the state and adjoint systems
    at w and w + eps*h and measures the first-order remainders

        sup_t |x(w + eps h) - x(w) - eps z|      (state route)
        sup_t |p(w + eps h) - p(w) - eps z_p|    (adjoint route)

    reporting both raw remainders and their (eps * sup|h|)-normalized form.
    """
    worst_x = worst_p = rem_x = rem_p = 0.0
    for sig in signals:
        for h in h_dirs:
            h_sup = float(np.max(np.linalg.norm(h.values, axis=-1)))
            if h_sup == 0.0:
                continue
            pert = sig.perturbed(h, eps)
            x_base = forward_batch(model, u, sig.values[None], grid)[0]
            x_pert = forward_batch(model, u, pert.values[None], grid)[0]
            z = variational_solve_state(model, u, sig, h, grid)
            diff_x = x_pert - x_base - eps * z
            r_x = float(np.max(np.linalg.norm(diff_x, axis=-1)))

            t_base = target_map.evaluate(sig)
            t_pert = target_map.evaluate(pert)
            p_base = backward_batch(
                model, u, sig.values[None], x_base[None], t_base[None], weights, grid
            )[0]
            p_pert = backward_batch(
                model, u, pert.values[None], x_pert[None], t_pert[None], weights, grid
            )[0]
            df = target_map.directional(sig, h)
            z_p = variational_solve_adjoint(
                model, u, sig, x_base, p_base, z, h, df, t_base, weights, grid
            )
            diff_p = p_pert - p_base - eps * z_p
            r_p = float(np.max(np.linalg.norm(diff_p, axis=-1)))

            rem_x = max(rem_x, r_x)
            rem_p = max(rem_p, r_p)
            worst_x = max(worst_x, r_x / (eps * h_sup))
            worst_p = max(worst_p, r_p / (eps * h_sup))
    return VariationalCheck(
        state_error=worst_x, adjoint_error=worst_p,
        state_remainder=rem_x, adjoint_remainder=rem_p,
    )


@dataclass(frozen=True)
class BoundsAudit:
    passed: bool
    x_sup: float
    p_sup: float
    state_bound: float
    adjoint_bound: float


def bounds_audit(x_sup: float, p_sup: float, report: CertificateReport) -> BoundsAudit:
    """Verify the observed trajectory suprema against the a priori bounds.

    Boundary equality is allowed; a relative slack of 1e-12 absorbs roundoff.
    """
    ok_x = x_sup <= report.state_bound * (1.0 + 1e-12)
    ok_p = p_sup <= report.adjoint_bound * (1.0 + 1e-12)
    return BoundsAudit(
        passed=bool(ok_x and ok_p),
        x_sup=x_sup,
        p_sup=p_sup,
        state_bound=report.state_bound,
        adjoint_bound=report.adjoint_bound,
    )

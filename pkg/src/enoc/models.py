"""Controlled linear-in-state dynamics: evaluators, derivatives, and bounds.

Every model realizes the same drift structure

    xdot(t, w) = A(t, w(t); u(t)) x(t, w) + B(t, w(t); u(t)),

with a fixed linear readout y = C x and a constant initial state.  The
interface exposes A and B, their first and second directional derivatives
in the control, directional derivatives in the input signal, and declared
or sampled supremum bounds used by the convergence certificates.

All evaluators broadcast: `t` is scalar or any leading batch shape,
`w` is (..., d), `u` is (..., m), and outputs are (..., n, n) or (..., n).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import ControlSet
from .errors import ModelDefinitionError


@dataclass(frozen=True)
class ModelDims:
    n: int       # state dimension
    d: int       # input channels
    d_out: int   # readout rows (>= n, full column rank readout)
    m: int       # control dimension


@dataclass(frozen=True)
class ModelBounds:
    """Supremum bounds over [0,T] x input region x control box.

    `sampled` marks bounds obtained as empirical suprema (a lower bound of
    the true supremum, inflated by `safety`); such bounds certify nothing
    but make the derived constants meaningful in practice.
    """

    a_sup: float        # sup |A| (spectral norm)
    b_sup: float        # sup |B|
    du_a_sup: float     # sup operator norm of the first control derivative of A
    du_b_sup: float
    d2u_a_sup: float    # sup operator norm of the second control derivative of A
    d2u_b_sup: float
    target_sup: float   # sup over the target set of |F(w)(t)|
    x0_sup: float       # sup |x0(w)|
    sampled: bool = False
    safety: float = 1.0

    def __post_init__(self):
        for name in (
            "a_sup", "b_sup", "du_a_sup", "du_b_sup",
            "d2u_a_sup", "d2u_b_sup", "target_sup", "x0_sup",
        ):
            v = float(getattr(self, name))
            if not (np.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
            object.__setattr__(self, name, v)

    def with_target_sup(self, target_sup: float) -> "ModelBounds":
        return replace(self, target_sup=float(target_sup))


def _batch_shape(t, w: np.ndarray, u: np.ndarray) -> tuple[int, ...]:
    return np.broadcast_shapes(np.shape(t), w.shape[:-1], u.shape[:-1])


def spectral_norms(mats: np.ndarray) -> np.ndarray:
    """Matrix 2-norms of a stack (..., n, n)."""
    return np.linalg.svd(mats, compute_uv=False)[..., 0]


class DynamicsModel:
    """Base class; concrete models fill in the evaluators below."""

    dims: ModelDims
    readout: np.ndarray   # (d_out, n)
    x0_vec: np.ndarray    # (n,)
    bounds: ModelBounds | None

    def __init__(self, dims: ModelDims, readout: np.ndarray, x0: np.ndarray | None):
        if readout.shape != (dims.d_out, dims.n):
            raise ModelDefinitionError(
                f"readout must be ({dims.d_out}, {dims.n}), got {readout.shape}"
            )
        if dims.d_out < dims.n:
            raise ModelDefinitionError(
                f"readout needs at least as many rows as state entries "
                f"({dims.d_out} < {dims.n})"
            )
        self.dims = dims
        self.readout = np.asarray(readout, dtype=float)
        self.x0_vec = (
            np.zeros(dims.n) if x0 is None else np.asarray(x0, dtype=float).reshape(dims.n)
        )
        self.bounds = None

    # -- evaluators ------------------------------------------------------

    def eval_A(self, t, w, u) -> np.ndarray:
        raise NotImplementedError

    def eval_B(self, t, w, u) -> np.ndarray:
        raise NotImplementedError

    def du_A(self, t, w, u, v) -> np.ndarray:
        """First directional control derivative of A along v (linear in v)."""
        raise NotImplementedError

    def du_B(self, t, w, u, v) -> np.ndarray:
        raise NotImplementedError

    def d2u_A(self, t, w, u, v, v2) -> np.ndarray:
        """Second control derivative of A, bilinear in (v, v2)."""
        raise NotImplementedError

    def d2u_B(self, t, w, u, v, v2) -> np.ndarray:
        raise NotImplementedError

    def dw_A(self, t, w, u, h) -> np.ndarray:
        """Directional derivative of A in the input value, along h."""
        raise NotImplementedError

    def dw_B(self, t, w, u, h) -> np.ndarray:
        raise NotImplementedError

    # -- initial state ----------------------------------------------------

    def initial_state(self, members: int) -> np.ndarray:
        """Initial states of a batch; constant across members."""
        return np.broadcast_to(self.x0_vec, (members, self.dims.n)).copy()

    # -- derived conveniences ----------------------------------------------

    def control_partials(self, t, w, u) -> tuple[np.ndarray, np.ndarray]:
        """All coordinate partials: (..., m, n, n) for A and (..., m, n) for B."""
        m = self.dims.m
        eye = np.eye(m)
        ta = np.stack([self.du_A(t, w, u, eye[l]) for l in range(m)], axis=-3)
        tb = np.stack([self.du_B(t, w, u, eye[l]) for l in range(m)], axis=-2)
        return ta, tb

    def pairing_grad(self, t, w, u, x, p) -> np.ndarray:
        """Control gradient of p . (A x + B): the vector with entries
        p . (dA/du_l x + dB/du_l), shape (..., m)."""
        ta, tb = self.control_partials(t, w, u)
        g = np.einsum("...i,...lij,...j->...l", p, ta, x)
        g += np.einsum("...i,...li->...l", p, tb)
        return g

    def declared_bounds(
        self, control_set: ControlSet, input_bound: float
    ) -> ModelBounds | None:
        """Analytic bounds when the model structure allows them, else None."""
        return None


def _embed_diag(diag: np.ndarray) -> np.ndarray:
    """(..., n) diagonal entries -> (..., n, n) diagonal matrices."""
    n = diag.shape[-1]
    out = np.zeros(diag.shape + (n,))
    idx = np.arange(n)
    out[..., idx, idx] = diag
    return out


class LinearSSM(DynamicsModel):
    """Fully parameterized linear system: the control is (vec A, vec Bmat)
    and the drift is A x + Bmat w(t)."""

    def __init__(self, n: int, d: int, readout: np.ndarray, x0: np.ndarray | None = None):
        dims = ModelDims(n=n, d=d, d_out=readout.shape[0], m=n * n + n * d)
        super().__init__(dims, readout, x0)

    def _split(self, u):
        n, d = self.dims.n, self.dims.d
        ua = u[..., : n * n].reshape(u.shape[:-1] + (n, n))
        ub = u[..., n * n :].reshape(u.shape[:-1] + (n, d))
        return ua, ub

    def eval_A(self, t, w, u):
        shape = _batch_shape(t, w, u)
        n = self.dims.n
        ua, _ = self._split(u)
        return np.broadcast_to(ua, shape + (n, n)).copy()

    def eval_B(self, t, w, u):
        _, ub = self._split(u)
        return np.einsum("...ij,...j->...i", ub, w)

    def du_A(self, t, w, u, v):
        return self.eval_A(t, w, v)

    def du_B(self, t, w, u, v):
        return self.eval_B(t, w, v)

    def d2u_A(self, t, w, u, v, v2):
        shape = _batch_shape(t, w, u)
        n = self.dims.n
        return np.zeros(shape + (n, n))

    def d2u_B(self, t, w, u, v, v2):
        return np.zeros(_batch_shape(t, w, u) + (self.dims.n,))

    def dw_A(self, t, w, u, h):
        return np.zeros(_batch_shape(t, w, u) + (self.dims.n, self.dims.n))

    def dw_B(self, t, w, u, h):
        _, ub = self._split(u)
        return np.einsum("...ij,...j->...i", ub, h)

    def pairing_grad(self, t, w, u, x, p):
        # p . (dA/dA_ij x) = p_i x_j and p . dB/dB_ij = p_i w_j
        ga = np.einsum("...i,...j->...ij", p, x)
        gb = np.einsum("...i,...j->...ij", p, w)
        flat = lambda a: a.reshape(a.shape[:-2] + (-1,))
        return np.concatenate([flat(ga), flat(gb)], axis=-1)

    def declared_bounds(self, control_set, input_bound):
        n, d = self.dims.n, self.dims.d
        corner = control_set.corner_abs()
        w_euclid = np.sqrt(d) * input_bound
        return ModelBounds(
            a_sup=float(np.linalg.norm(corner[: n * n])),
            b_sup=float(np.linalg.norm(corner[n * n :]) * w_euclid),
            du_a_sup=1.0,
            du_b_sup=float(w_euclid),
            d2u_a_sup=0.0,
            d2u_b_sup=0.0,
            target_sup=0.0,
            x0_sup=float(np.linalg.norm(self.x0_vec)),
        )


class DiagS4(DynamicsModel):
    """Channel-separated diagonal system: state block i sees only input
    channel i.  Control = (all diagonal transition entries, shared input
    vector btilde)."""

    def __init__(
        self, n_state: int, d: int, readout: np.ndarray, x0: np.ndarray | None = None
    ):
        self.n_state = n_state
        dims = ModelDims(n=n_state * d, d=d, d_out=readout.shape[0], m=n_state * d + n_state)
        super().__init__(dims, readout, x0)

    def _split(self, u):
        n, ns = self.dims.n, self.n_state
        return u[..., :n], u[..., n : n + ns]

    def eval_A(self, t, w, u):
        diag, _ = self._split(u)
        shape = _batch_shape(t, w, u)
        return _embed_diag(np.broadcast_to(diag, shape + (self.dims.n,)))

    def eval_B(self, t, w, u):
        _, bt = self._split(u)
        blocks = np.einsum("...i,...s->...is", w, bt)
        return blocks.reshape(blocks.shape[:-2] + (self.dims.n,))

    def du_A(self, t, w, u, v):
        return self.eval_A(t, w, v)

    def du_B(self, t, w, u, v):
        return self.eval_B(t, w, v)

    def d2u_A(self, t, w, u, v, v2):
        return np.zeros(_batch_shape(t, w, u) + (self.dims.n, self.dims.n))

    def d2u_B(self, t, w, u, v, v2):
        return np.zeros(_batch_shape(t, w, u) + (self.dims.n,))

    def dw_A(self, t, w, u, h):
        return np.zeros(_batch_shape(t, w, u) + (self.dims.n, self.dims.n))

    def dw_B(self, t, w, u, h):
        _, bt = self._split(u)
        blocks = np.einsum("...i,...s->...is", h, bt)
        return blocks.reshape(blocks.shape[:-2] + (self.dims.n,))

    def pairing_grad(self, t, w, u, x, p):
        ns, d = self.n_state, self.dims.d
        ga = p * x
        p_blk = p.reshape(p.shape[:-1] + (d, ns))
        gb = np.einsum("...is,...i->...s", p_blk, w)
        return np.concatenate([ga, gb], axis=-1)

    def declared_bounds(self, control_set, input_bound):
        n = self.dims.n
        corner = control_set.corner_abs()
        w_euclid = np.sqrt(self.dims.d) * input_bound
        return ModelBounds(
            a_sup=float(np.max(corner[:n])),
            b_sup=float(np.linalg.norm(corner[n:]) * w_euclid),
            du_a_sup=1.0,
            du_b_sup=float(w_euclid),
            d2u_a_sup=0.0,
            d2u_b_sup=0.0,
            target_sup=0.0,
            x0_sup=float(np.linalg.norm(self.x0_vec)),
        )


def _softplus(y: np.ndarray) -> np.ndarray:
    # overflow-safe: softplus(y) = max(y, 0) + log1p(exp(-|y|))
    return np.maximum(y, 0.0) + np.log1p(np.exp(-np.abs(y)))


def _sigmoid(y: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    pos = y >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-y[pos]))
    ey = np.exp(y[~pos])
    out[~pos] = ey / (1.0 + ey)
    return out


class SelectiveS6(DynamicsModel):
    """Input-gated diagonal system (continuous-time selective model).

    Per channel i the transition block is diag(a_i) scaled by the gate
    sigma(alpha_i . w(t) + beta_i), and the forcing block is
    (Bmat w(t)) * w_i(t) * gate_i, where sigma(z) = softplus(z / delta).
    Control = (a_1..a_d, Bmat, alpha_1..alpha_d, beta_1..beta_d).
    """

    def __init__(
        self,
        n_state: int,
        d: int,
        readout: np.ndarray,
        delta: float = 1.0,
        x0: np.ndarray | None = None,
    ):
        if not (delta > 0 and np.isfinite(delta)):
            raise ModelDefinitionError(f"gate sharpness delta must be > 0, got {delta}")
        self.n_state = n_state
        self.delta = float(delta)
        m = 2 * n_state * d + d * d + d
        dims = ModelDims(n=n_state * d, d=d, d_out=readout.shape[0], m=m)
        super().__init__(dims, readout, x0)

    def _split(self, u):
        ns, d = self.n_state, self.dims.d
        lead = u.shape[:-1]
        k0, k1, k2 = ns * d, 2 * ns * d, 2 * ns * d + d * d
        a = u[..., :k0].reshape(lead + (d, ns))
        bmat = u[..., k0:k1].reshape(lead + (ns, d))
        al = u[..., k1:k2].reshape(lead + (d, d))
        be = u[..., k2:]
        return a, bmat, al, be

    def _gates(self, w, al, be):
        z = np.einsum("...ij,...j->...i", al, w) + be
        y = z / self.delta
        g = _softplus(y)
        s = _sigmoid(y)
        gp = s / self.delta
        gpp = s * (1.0 - s) / self.delta**2
        return g, gp, gpp

    def sigma(self, z: np.ndarray) -> np.ndarray:
        """The gate nonlinearity itself (positive, increasing)."""
        return _softplus(np.asarray(z, dtype=float) / self.delta)

    def _flatten_blocks(self, blocks: np.ndarray) -> np.ndarray:
        return blocks.reshape(blocks.shape[:-2] + (self.dims.n,))

    def eval_A(self, t, w, u):
        a, _, al, be = self._split(u)
        g, _, _ = self._gates(w, al, be)
        return _embed_diag(self._flatten_blocks(a * g[..., :, None]))

    def eval_B(self, t, w, u):
        _, bmat, al, be = self._split(u)
        g, _, _ = self._gates(w, al, be)
        bw = np.einsum("...sd,...d->...s", bmat, w)
        blocks = bw[..., None, :] * (w * g)[..., :, None]
        return self._flatten_blocks(blocks)

    def du_A(self, t, w, u, v):
        a, _, al, be = self._split(u)
        va, _, val, vbe = self._split(np.asarray(v, dtype=float))
        g, gp, _ = self._gates(w, al, be)
        zeta = np.einsum("...ij,...j->...i", val, w) + vbe
        diag = va * g[..., :, None] + a * (gp * zeta)[..., :, None]
        return _embed_diag(self._flatten_blocks(diag))

    def du_B(self, t, w, u, v):
        _, bmat, al, be = self._split(u)
        _, vb, val, vbe = self._split(np.asarray(v, dtype=float))
        g, gp, _ = self._gates(w, al, be)
        zeta = np.einsum("...ij,...j->...i", val, w) + vbe
        bw = np.einsum("...sd,...d->...s", bmat, w)
        vbw = np.einsum("...sd,...d->...s", vb, w)
        blocks = vbw[..., None, :] * (w * g)[..., :, None]
        blocks += bw[..., None, :] * (w * gp * zeta)[..., :, None]
        return self._flatten_blocks(blocks)

    def d2u_A(self, t, w, u, v, v2):
        a, _, al, be = self._split(u)
        va, _, val, vbe = self._split(np.asarray(v, dtype=float))
        wa, _, wal, wbe = self._split(np.asarray(v2, dtype=float))
        _, gp, gpp = self._gates(w, al, be)
        zv = np.einsum("...ij,...j->...i", val, w) + vbe
        zw = np.einsum("...ij,...j->...i", wal, w) + wbe
        diag = (
            va * (gp * zw)[..., :, None]
            + wa * (gp * zv)[..., :, None]
            + a * (gpp * zv * zw)[..., :, None]
        )
        return _embed_diag(self._flatten_blocks(diag))

    def d2u_B(self, t, w, u, v, v2):
        _, bmat, al, be = self._split(u)
        _, vb, val, vbe = self._split(np.asarray(v, dtype=float))
        _, wb, wal, wbe = self._split(np.asarray(v2, dtype=float))
        _, gp, gpp = self._gates(w, al, be)
        zv = np.einsum("...ij,...j->...i", val, w) + vbe
        zw = np.einsum("...ij,...j->...i", wal, w) + wbe
        bw = np.einsum("...sd,...d->...s", bmat, w)
        vbw = np.einsum("...sd,...d->...s", vb, w)
        wbw = np.einsum("...sd,...d->...s", wb, w)
        blocks = vbw[..., None, :] * (w * gp * zw)[..., :, None]
        blocks += wbw[..., None, :] * (w * gp * zv)[..., :, None]
        blocks += bw[..., None, :] * (w * gpp * zv * zw)[..., :, None]
        return self._flatten_blocks(blocks)

    def dw_A(self, t, w, u, h):
        a, _, al, be = self._split(u)
        _, gp, _ = self._gates(w, al, be)
        zh = np.einsum("...ij,...j->...i", al, h)
        return _embed_diag(self._flatten_blocks(a * (gp * zh)[..., :, None]))

    def dw_B(self, t, w, u, h):
        _, bmat, al, be = self._split(u)
        g, gp, _ = self._gates(w, al, be)
        zh = np.einsum("...ij,...j->...i", al, h)
        bw = np.einsum("...sd,...d->...s", bmat, w)
        bh = np.einsum("...sd,...d->...s", bmat, h)
        blocks = bh[..., None, :] * (w * g)[..., :, None]
        blocks += bw[..., None, :] * (h * g)[..., :, None]
        blocks += bw[..., None, :] * (w * gp * zh)[..., :, None]
        return self._flatten_blocks(blocks)

    def pairing_grad(self, t, w, u, x, p):
        ns, d = self.n_state, self.dims.d
        a, bmat, al, be = self._split(u)
        g, gp, _ = self._gates(w, al, be)
        lead = np.broadcast_shapes(p.shape[:-1], x.shape[:-1], w.shape[:-1], u.shape[:-1])
        p_blk = np.broadcast_to(p, lead + (self.dims.n,)).reshape(lead + (d, ns))
        x_blk = np.broadcast_to(x, lead + (self.dims.n,)).reshape(lead + (d, ns))
        bw = np.einsum("...sd,...d->...s", bmat, w)

        ga = p_blk * x_blk * g[..., :, None]
        q = np.einsum("...is,...i->...s", p_blk, w * g)
        gb = q[..., :, None] * w[..., None, :]
        bracket = np.einsum("...is,...is->...i", p_blk, a * x_blk)
        bracket += np.einsum("...is,...s->...i", p_blk, bw) * w
        coeff = bracket * gp
        gal = coeff[..., :, None] * w[..., None, :]
        gbe = coeff

        flat = lambda arr: arr.reshape(arr.shape[:-2] + (-1,))
        return np.concatenate([flat(ga), flat(gb), flat(gal), gbe], axis=-1)


def make_model(
    kind: str,
    *,
    d: int,
    d_out: int | None = None,
    n: int | None = None,
    n_state: int | None = None,
    delta: float = 1.0,
    readout="identity",
    x0=None,
) -> DynamicsModel:
    """Construct a built-in model by kind ('linear', 's4', 's6')."""
    kind = kind.lower()
    if kind == "linear":
        if n is None or n < 1:
            raise ModelDefinitionError("linear model needs a state dimension n >= 1")
        state_dim = n
    elif kind in ("s4", "s6"):
        if n_state is None or n_state < 1:
            raise ModelDefinitionError(f"{kind} model needs n_state >= 1")
        if n is not None and n != n_state * d:
            raise ModelDefinitionError(
                f"inconsistent dims: n={n} but n_state*d={n_state * d}"
            )
        state_dim = n_state * d
    else:
        raise ModelDefinitionError(f"unknown model kind {kind!r}")

    if isinstance(readout, str):
        if readout != "identity":
            raise ModelDefinitionError(f"unknown readout spec {readout!r}")
        if d_out is not None and d_out != state_dim:
            raise ModelDefinitionError(
                f"identity readout requires d_out == n ({d_out} != {state_dim})"
            )
        c_mat = np.eye(state_dim)
    else:
        c_mat = np.asarray(readout, dtype=float)
        if c_mat.ndim != 2 or c_mat.shape[1] != state_dim:
            raise ModelDefinitionError(
                f"readout must have {state_dim} columns, got shape {c_mat.shape}"
            )
        if d_out is not None and c_mat.shape[0] != d_out:
            raise ModelDefinitionError(
                f"readout has {c_mat.shape[0]} rows but d_out={d_out}"
            )

    if kind == "linear":
        return LinearSSM(n=state_dim, d=d, readout=c_mat, x0=x0)
    if kind == "s4":
        return DiagS4(n_state=n_state, d=d, readout=c_mat, x0=x0)
    return SelectiveS6(n_state=n_state, d=d, readout=c_mat, delta=delta, x0=x0)


def fd_derivative_fallback(model: DynamicsModel, t, w, u, v, eps: float):
    """Centered finite differences of (A, B) in the control along v."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    da = (model.eval_A(t, w, u + eps * v) - model.eval_A(t, w, u - eps * v)) / (2 * eps)
    db = (model.eval_B(t, w, u + eps * v) - model.eval_B(t, w, u - eps * v)) / (2 * eps)
    return da, db


def fd_input_derivative(model: DynamicsModel, t, w, u, h, eps: float):
    """Centered finite differences of (A, B) in the input value along h."""
    w = np.asarray(w, dtype=float)
    h = np.asarray(h, dtype=float)
    da = (model.eval_A(t, w + eps * h, u) - model.eval_A(t, w - eps * h, u)) / (2 * eps)
    db = (model.eval_B(t, w + eps * h, u) - model.eval_B(t, w - eps * h, u)) / (2 * eps)
    return da, db


def declare_or_estimate_bounds(
    model: DynamicsModel,
    control_set: ControlSet,
    input_bound: float,
    horizon: float = 1.0,
    target_sup: float = 0.0,
    budget: int = 2048,
    seed: int = 0,
    safety: float = 1.5,
) -> ModelBounds:
    """Analytic bounds where the model provides them, sampled suprema otherwise.

    Sampled estimation draws `budget` random (t, w, u) triples with per-channel
    |w_j| <= input_bound and u in the control box.  Operator norms of the
    control derivatives are assembled from per-coordinate bounds: if every
    coordinate partial of A is bounded by gbar then the first derivative's
    operator norm is at most sqrt(m) * gbar, and if every second partial is
    bounded by hbar the bilinear norm is at most m * hbar.  The empirical
    per-coordinate maxima are inflated by `safety` before assembly and the
    result is flagged as sampled (a lower bound of the true supremum).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    declared = model.declared_bounds(control_set, input_bound)
    if declared is not None:
        return declared.with_target_sup(target_sup)

    m = model.dims.m
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    t_s = rng.uniform(0.0, horizon, size=budget)
    w_s = rng.uniform(-input_bound, input_bound, size=(budget, model.dims.d))
    u_s = control_set.sample(rng, (budget,))

    a_sup = float(np.max(spectral_norms(model.eval_A(t_s, w_s, u_s))))
    b_sup = float(np.max(np.linalg.norm(model.eval_B(t_s, w_s, u_s), axis=-1)))

    eye = np.eye(m)
    gbar_a = 0.0
    gbar_b = 0.0
    for l in range(m):
        gbar_a = max(gbar_a, float(np.max(spectral_norms(model.du_A(t_s, w_s, u_s, eye[l])))))
        gbar_b = max(
            gbar_b, float(np.max(np.linalg.norm(model.du_B(t_s, w_s, u_s, eye[l]), axis=-1)))
        )
    hbar_a = 0.0
    hbar_b = 0.0
    for i in range(m):
        for j in range(i, m):
            d2a = model.d2u_A(t_s, w_s, u_s, eye[i], eye[j])
            d2b = model.d2u_B(t_s, w_s, u_s, eye[i], eye[j])
            hbar_a = max(hbar_a, float(np.max(spectral_norms(d2a))))
            hbar_b = max(hbar_b, float(np.max(np.linalg.norm(d2b, axis=-1))))

    return ModelBounds(
        a_sup=a_sup * safety,
        b_sup=b_sup * safety,
        du_a_sup=np.sqrt(m) * gbar_a * safety,
        du_b_sup=np.sqrt(m) * gbar_b * safety,
        d2u_a_sup=m * hbar_a * safety,
        d2u_b_sup=m * hbar_b * safety,
        target_sup=float(target_sup),
        x0_sup=float(np.linalg.norm(model.x0_vec)),
        sampled=True,
        safety=safety,
    )

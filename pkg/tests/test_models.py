"""Model evaluators, control/input derivatives, and bound metadata."""

import numpy as np
import pytest

from enoc.core import ControlSet
from enoc.errors import ModelDefinitionError
from enoc.models import (
    DynamicsModel,
    ModelBounds,
    ModelDims,
    SelectiveS6,
    declare_or_estimate_bounds,
    fd_derivative_fallback,
    make_model,
    spectral_norms,
)

RNG = np.random.default_rng(2024)


def _models():
    return [
        make_model("linear", n=2, d=2, readout="identity"),
        make_model("s4", n_state=2, d=3, readout=np.eye(6)),
        make_model("s6", n_state=2, d=2, readout="identity", delta=1.0),
    ]


def test_make_model_dimensions():
    lin = make_model("linear", n=2, d=3, readout="identity")
    assert lin.dims.m == 4 + 6
    s4 = make_model("s4", n_state=3, d=2, readout=np.eye(6))
    assert (s4.dims.n, s4.dims.m) == (6, 6 + 3)
    s6 = make_model("s6", n_state=2, d=2, readout="identity")
    assert (s6.dims.n, s6.dims.m) == (4, 2 * 4 + 4 + 2)


def test_make_model_rejects_bad_params():
    with pytest.raises(ModelDefinitionError):
        make_model("s6", n_state=2, d=2, n=5, readout="identity")  # n != n_state*d
    with pytest.raises(ModelDefinitionError):
        make_model("s6", n_state=2, d=2, readout="identity", delta=0.0)
    with pytest.raises(ModelDefinitionError):
        make_model("linear", n=2, d=1, readout=np.eye(3))  # wrong column count
    with pytest.raises(ModelDefinitionError):
        make_model("linear", n=2, d=1, readout="identity", d_out=5)
    with pytest.raises(ModelDefinitionError):
        make_model("linear", n=2, d=1, readout=np.ones((1, 2)))  # d_out < n


def test_linear_zero_control_gives_zero_dynamics():
    model = make_model("linear", n=2, d=2, readout="identity")
    u = np.zeros(model.dims.m)
    w = RNG.uniform(-1, 1, 2)
    assert np.all(model.eval_A(0.3, w, u) == 0.0)
    assert np.all(model.eval_B(0.3, w, u) == 0.0)


def test_s6_gate_at_zero_is_log_two():
    model = make_model("s6", n_state=2, d=2, readout="identity", delta=1.0)
    # all gate parameters zero: every gate value is softplus(0) = ln 2
    u = np.zeros(model.dims.m)
    u[: 2 * 2] = 1.0  # diagonal transition entries set to one
    w = RNG.uniform(-3, 3, 2)
    a = model.eval_A(0.0, w, u)
    diag = np.diagonal(a)
    np.testing.assert_allclose(diag, np.log(2.0), rtol=1e-14)


def test_s6_block_structure_matches_hand_build():
    ns, d = 2, 2
    model = SelectiveS6(n_state=ns, d=d, readout=np.eye(ns * d), delta=0.7)
    u = RNG.uniform(-1, 1, model.dims.m)
    w = RNG.uniform(-1, 1, d)
    a_blocks = u[: ns * d].reshape(d, ns)
    bmat = u[ns * d : 2 * ns * d].reshape(ns, d)
    alphas = u[2 * ns * d : 2 * ns * d + d * d].reshape(d, d)
    betas = u[2 * ns * d + d * d :]
    gates = model.sigma(alphas @ w + betas)
    a_hand = np.zeros((ns * d, ns * d))
    b_hand = np.zeros(ns * d)
    for i in range(d):
        sl = slice(i * ns, (i + 1) * ns)
        a_hand[sl, sl] = np.diag(a_blocks[i] * gates[i])
        b_hand[sl] = (bmat @ w) * w[i] * gates[i]
    np.testing.assert_allclose(model.eval_A(0.0, w, u), a_hand, atol=1e-14)
    np.testing.assert_allclose(model.eval_B(0.0, w, u), b_hand, atol=1e-14)


def test_s6_gate_positive_and_monotone():
    model = make_model("s6", n_state=1, d=1, readout="identity", delta=0.5)
    z = np.linspace(-40, 40, 401)
    g = model.sigma(z)
    assert np.all(g > 0)
    assert np.all(np.diff(g) > 0)
    # overflow-safe far in both tails
    assert np.isfinite(model.sigma(np.array([1e4, -1e4]))).all()


def test_derivative_linearity_in_direction():
    for model in _models():
        m = model.dims.m
        t, w = 0.2, RNG.uniform(-1, 1, model.dims.d)
        u = RNG.uniform(-1, 1, m)
        v1, v2 = RNG.standard_normal(m), RNG.standard_normal(m)
        a = 1.7
        lhs = model.du_A(t, w, u, a * v1 + v2)
        rhs = a * model.du_A(t, w, u, v1) + model.du_A(t, w, u, v2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)
        lhs_b = model.du_B(t, w, u, a * v1 + v2)
        rhs_b = a * model.du_B(t, w, u, v1) + model.du_B(t, w, u, v2)
        np.testing.assert_allclose(lhs_b, rhs_b, atol=1e-12)


def test_first_derivatives_match_fd():
    for model in _models():
        t, w = 0.4, RNG.uniform(-1, 1, model.dims.d)
        u = RNG.uniform(-0.8, 0.8, model.dims.m)
        v = RNG.standard_normal(model.dims.m)
        da, db = fd_derivative_fallback(model, t, w, u, v, eps=1e-5)
        scale = max(np.max(np.abs(da)), 1.0)
        assert np.max(np.abs(da - model.du_A(t, w, u, v))) / scale < 1e-6
        scale_b = max(np.max(np.abs(db)), 1.0)
        assert np.max(np.abs(db - model.du_B(t, w, u, v))) / scale_b < 1e-6


def test_fd_fallback_exact_for_linear_and_zero_direction():
    model = make_model("linear", n=2, d=1, readout="identity")
    t, w = 0.0, np.array([0.5])
    u = RNG.uniform(-1, 1, model.dims.m)
    v = RNG.standard_normal(model.dims.m)
    da, db = fd_derivative_fallback(model, t, w, u, v, eps=1e-3)
    np.testing.assert_allclose(da, model.du_A(t, w, u, v), atol=1e-10)
    np.testing.assert_allclose(db, model.du_B(t, w, u, v), atol=1e-10)
    da0, db0 = fd_derivative_fallback(model, t, w, u, np.zeros(model.dims.m), eps=1e-5)
    assert np.all(da0 == 0.0) and np.all(db0 == 0.0)


def test_second_derivatives_match_fd():
    model = make_model("s6", n_state=2, d=2, readout="identity")
    t, w = 0.1, RNG.uniform(-1, 1, 2)
    u = RNG.uniform(-0.8, 0.8, model.dims.m)
    v = RNG.standard_normal(model.dims.m)
    e = 1e-4
    fd = (model.eval_A(t, w, u + e * v) - 2 * model.eval_A(t, w, u)
          + model.eval_A(t, w, u - e * v)) / e**2
    assert np.max(np.abs(fd - model.d2u_A(t, w, u, v, v))) < 1e-6
    fd_b = (model.eval_B(t, w, u + e * v) - 2 * model.eval_B(t, w, u)
            + model.eval_B(t, w, u - e * v)) / e**2
    assert np.max(np.abs(fd_b - model.d2u_B(t, w, u, v, v))) < 1e-6


def test_second_derivatives_vanish_for_control_affine_models():
    for model in _models()[:2]:
        t, w = 0.5, RNG.uniform(-1, 1, model.dims.d)
        u = RNG.uniform(-1, 1, model.dims.m)
        v = RNG.standard_normal(model.dims.m)
        assert np.all(model.d2u_A(t, w, u, v, v) == 0.0)
        assert np.all(model.d2u_B(t, w, u, v, v) == 0.0)


def test_pairing_grad_matches_partials_route():
    for model in _models():
        t, w = 0.3, RNG.uniform(-1, 1, model.dims.d)
        u = RNG.uniform(-1, 1, model.dims.m)
        x = RNG.standard_normal(model.dims.n)
        p = RNG.standard_normal(model.dims.n)
        ta, tb = model.control_partials(t, w, u)
        ref = np.einsum("i,lij,j->l", p, ta, x) + np.einsum("i,li->l", p, tb)
        np.testing.assert_allclose(model.pairing_grad(t, w, u, x, p), ref, atol=1e-12)


def test_declared_bounds_envelope_random_points():
    # declared/sampled bounds dominate derivative norms at fresh random points
    box = ControlSet(lower=-np.ones(1), upper=np.ones(1))
    for model in _models():
        m = model.dims.m
        cs = ControlSet(lower=-np.ones(m), upper=np.ones(m))
        bounds = declare_or_estimate_bounds(
            model, cs, input_bound=1.0, horizon=1.0, budget=2048, seed=0, safety=1.5
        )
        for _ in range(100):
            t = RNG.uniform(0, 1)
            w = RNG.uniform(-1, 1, model.dims.d)
            u = cs.sample(RNG)
            v = RNG.standard_normal(m)
            a = model.eval_A(t, w, u)
            assert spectral_norms(a[None])[0] <= bounds.a_sup + 1e-9
            assert np.linalg.norm(model.eval_B(t, w, u)) <= bounds.b_sup + 1e-9
            da = model.du_A(t, w, u, v)
            assert spectral_norms(da[None])[0] <= bounds.du_a_sup * np.linalg.norm(v) + 1e-9
            db = model.du_B(t, w, u, v)
            assert np.linalg.norm(db) <= bounds.du_b_sup * np.linalg.norm(v) + 1e-9
            d2a = model.d2u_A(t, w, u, v, v)
            assert (
                spectral_norms(d2a[None])[0]
                <= bounds.d2u_a_sup * np.linalg.norm(v) ** 2 + 1e-9
            )
            d2b = model.d2u_B(t, w, u, v, v)
            assert (
                np.linalg.norm(d2b)
                <= bounds.d2u_b_sup * np.linalg.norm(v) ** 2 + 1e-9
            )


def test_linear_declared_bounds_have_zero_second_order():
    model = make_model("linear", n=2, d=2, readout="identity")
    cs = ControlSet(lower=-np.ones(model.dims.m), upper=np.ones(model.dims.m))
    bounds = declare_or_estimate_bounds(model, cs, input_bound=1.0)
    assert bounds.d2u_a_sup == 0.0 and bounds.d2u_b_sup == 0.0
    assert not bounds.sampled


class _FlatSecond(DynamicsModel):
    """Stub with per-coordinate partials of norm exactly one (first and
    second order), to pin the operator-norm assembly factors."""

    def __init__(self, m: int):
        super().__init__(ModelDims(n=2, d=1, d_out=2, m=m), np.eye(2), None)
        self._units = [np.eye(2) for _ in range(m)]

    def eval_A(self, t, w, u):
        shape = np.broadcast_shapes(np.shape(t), w.shape[:-1], u.shape[:-1])
        base = sum(u[..., l, None, None] * self._units[l] for l in range(self.dims.m))
        quad = 0.5 * sum(
            u[..., i, None, None] * u[..., j, None, None] * np.eye(2)
            for i in range(self.dims.m)
            for j in range(self.dims.m)
        )
        return np.broadcast_to(base + quad, shape + (2, 2)).copy()

    def eval_B(self, t, w, u):
        shape = np.broadcast_shapes(np.shape(t), w.shape[:-1], u.shape[:-1])
        return np.zeros(shape + (2,))

    def du_A(self, t, w, u, v):
        v = np.asarray(v, dtype=float)
        shape = np.broadcast_shapes(np.shape(t), w.shape[:-1], u.shape[:-1], v.shape[:-1])
        lin = sum(v[..., l, None, None] * self._units[l] for l in range(self.dims.m))
        cross = np.sum(u * v, axis=-1)[..., None, None] * np.eye(2)
        return np.broadcast_to(lin + cross, shape + (2, 2)).copy()

    def du_B(self, t, w, u, v):
        return self.eval_B(t, w, u)

    def d2u_A(self, t, w, u, v, v2):
        v = np.asarray(v, dtype=float)
        v2 = np.asarray(v2, dtype=float)
        shape = np.broadcast_shapes(np.shape(t), w.shape[:-1], u.shape[:-1])
        coef = np.sum(v * v2, axis=-1)[..., None, None]
        return np.broadcast_to(coef * np.eye(2), shape + (2, 2)).copy()

    def d2u_B(self, t, w, u, v, v2):
        return self.eval_B(t, w, u)


def test_operator_norm_assembly_factors():
    # per-coordinate first partials bounded by gbar give a sqrt(m) factor,
    # second partials bounded by hbar an m factor
    m = 4
    model = _FlatSecond(m)
    cs = ControlSet(lower=np.zeros(m), upper=np.zeros(m))  # partials at u=0 are unit
    bounds = declare_or_estimate_bounds(
        model, cs, input_bound=1.0, horizon=1.0, budget=16, seed=0, safety=1.0
    )
    assert bounds.sampled
    assert bounds.du_a_sup == pytest.approx(np.sqrt(m) * 1.0, rel=1e-12)
    assert bounds.d2u_a_sup == pytest.approx(m * 1.0, rel=1e-12)


def test_bounds_validation():
    with pytest.raises(ValueError):
        ModelBounds(
            a_sup=-1.0, b_sup=0.0, du_a_sup=0.0, du_b_sup=0.0,
            d2u_a_sup=0.0, d2u_b_sup=0.0, target_sup=0.0, x0_sup=0.0,
        )

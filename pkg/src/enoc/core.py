"""Time grids, trajectory containers, box control sets, and time quadrature.

Everything downstream works on a uniform grid over [0, T] with N steps.
Three resolutions of the same grid appear throughout:

* nodes        t_i = i*h,           i = 0..N      (h = T/N)
* refined      nodes plus midpoints, 2N+1 points  (step h/2)
* quarter      every h/4,            4N+1 points

States are stored on the refined grid, adjoints on the nodes, and input
signals are pre-sampled on the quarter grid so that no integrator stage
ever interpolates an input value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform discretization of [0, horizon] with `steps` intervals."""

    horizon: float
    steps: int
    nodes: np.ndarray = field(init=False, repr=False)
    half_nodes: np.ndarray = field(init=False, repr=False)
    refined: np.ndarray = field(init=False, repr=False)
    quarter: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if self.steps < 2:
            raise ValueError(f"steps must be >= 2, got {self.steps}")
        n = self.steps
        object.__setattr__(self, "nodes", np.linspace(0.0, self.horizon, n + 1))
        object.__setattr__(self, "refined", np.linspace(0.0, self.horizon, 2 * n + 1))
        object.__setattr__(self, "quarter", np.linspace(0.0, self.horizon, 4 * n + 1))
        object.__setattr__(self, "half_nodes", self.refined[1::2])

    @property
    def h(self) -> float:
        return self.horizon / self.steps

    def node_weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights on the nodes."""
        w = np.full(self.steps + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


@dataclass(frozen=True)
class ControlSet:
    """Axis-aligned box [lower, upper] in control space.

    Nonempty, convex, and compact by construction; the Euclidean projection
    is the componentwise clamp.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("control box must be bounded")
        if np.any(lo > hi):
            raise ValueError("control box is empty (lower > upper somewhere)")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def project(self, v: np.ndarray) -> np.ndarray:
        """Closest point of the box to v (componentwise clamp)."""
        return np.clip(v, self.lower, self.upper)

    def contains(self, v: np.ndarray, tol: float = 0.0) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.all(v >= self.lower - tol) and np.all(v <= self.upper + tol))

    def sample(self, rng: np.random.Generator, shape: tuple[int, ...] = ()) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=shape + (self.dim,))

    def corner_abs(self) -> np.ndarray:
        """Componentwise max of |v| over the box."""
        return np.maximum(np.abs(self.lower), np.abs(self.upper))


def project_onto_control_set(v: np.ndarray, control_set: ControlSet) -> np.ndarray:
    """Euclidean projection of v onto the box; total and idempotent."""
    return control_set.project(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class ControlTrajectory:
    """Control values at the grid nodes, piecewise-linear in between.

    Node values inside a convex set imply every interpolated value is too,
    so the trajectory is a continuous admissible control.
    """

    values: np.ndarray  # (N+1, m)
    grid: TimeGrid

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != self.grid.steps + 1:
            raise ValueError(
                f"expected {self.grid.steps + 1} node values, got {vals.shape[0]}"
            )
        if not np.isfinite(vals).all():
            raise ValueError("control values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __call__(self, t) -> np.ndarray:
        """Evaluate the interpolant at arbitrary times (continuous in t)."""
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (self.dim,))
        for j in range(self.dim):
            out[..., j] = np.interp(t, self.grid.nodes, self.values[:, j])
        return out

    def on_quarter_grid(self) -> np.ndarray:
        """Values at every quarter point, by exact rational interpolation weights."""
        n = self.grid.steps
        q = np.arange(4 * n + 1)
        i = np.minimum(q // 4, n - 1)
        r = (q - 4 * i)[:, None].astype(float)
        return ((4.0 - r) * self.values[i] + r * self.values[i + 1]) / 4.0

    def on_refined_grid(self) -> np.ndarray:
        return self.on_quarter_grid()[::2]

    def in_set(self, control_set: ControlSet, tol: float = 0.0) -> bool:
        return control_set.contains(self.values.min(axis=0), tol) and control_set.contains(
            self.values.max(axis=0), tol
        )


@dataclass(frozen=True)
class StatePath:
    """State samples of one ensemble member on the refined grid (2N+1 points)."""

    values: np.ndarray  # (2N+1, n)
    grid: TimeGrid

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape[0] != 2 * self.grid.steps + 1:
            raise ValueError(
                f"expected {2 * self.grid.steps + 1} refined samples, got {vals.shape[0]}"
            )
        object.__setattr__(self, "values", vals)

    @property
    def at_nodes(self) -> np.ndarray:
        return self.values[::2]

    @property
    def at_half_nodes(self) -> np.ndarray:
        return self.values[1::2]


@dataclass(frozen=True)
class AdjointPath:
    """Adjoint samples of one ensemble member at the grid nodes; zero at t = T."""

    values: np.ndarray  # (N+1, n)
    grid: TimeGrid

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape[0] != self.grid.steps + 1:
            raise ValueError(
                f"expected {self.grid.steps + 1} node samples, got {vals.shape[0]}"
            )
        object.__setattr__(self, "values", vals)

    @property
    def at_nodes(self) -> np.ndarray:
        return self.values


@dataclass(frozen=True)
class CostWeights:
    """Data-fit weight alpha >= 0 and control-effort weight beta > 0."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha >= 0.0 and np.isfinite(self.alpha)):
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not (self.beta > 0.0 and np.isfinite(self.beta)):
            raise ValueError(f"beta must be > 0, got {self.beta}")


def _pointwise_abs(values: np.ndarray) -> np.ndarray:
    """|f(t_i)| per node: absolute value for scalars, Euclidean norm for vectors."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return np.abs(values)
    return np.sqrt(np.sum(values * values, axis=-1))


def l2_norm_time(values: np.ndarray, grid: TimeGrid) -> float:
    """Trapezoidal approximation of the time L2 norm of a node path."""
    mag2 = _pointwise_abs(values) ** 2
    if mag2.shape[0] != grid.steps + 1:
        raise ValueError("path must be sampled at every node")
    return float(np.sqrt(np.sum(grid.node_weights() * mag2)))


def sup_norm_time(values: np.ndarray, grid: TimeGrid) -> float:
    """Maximum of |f| over the grid nodes."""
    mag = _pointwise_abs(values)
    if mag.shape[0] != grid.steps + 1:
        raise ValueError("path must be sampled at every node")
    return float(np.max(mag))

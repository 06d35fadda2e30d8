"""Input sampling, target construction, and the empirical ensemble average.

The ensemble measure is realized as the uniform average over finitely many
sampled input trajectories.  Inputs are truncated Fourier series with
coefficients drawn i.i.d. uniform from [-R, R], pre-sampled on the quarter
grid so integrator stages never interpolate them; a channel is bounded by
R * (1 + 2K) pointwise by construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import ControlTrajectory, TimeGrid
from . import dynamics
from .models import DynamicsModel


@dataclass(frozen=True)
class InputSignal:
    """One input trajectory, sampled on the quarter grid: (4N+1, d)."""

    values: np.ndarray
    grid: TimeGrid
    fourier_order: int | None = None
    coeff_bound: float | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != 4 * self.grid.steps + 1:
            raise ValueError(f"expected (4N+1, d) samples, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    @property
    def channel_sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def on_refined_grid(self) -> np.ndarray:
        return self.values[::2]

    def perturbed(self, h: "InputSignal", eps: float) -> "InputSignal":
        return InputSignal(values=self.values + eps * h.values, grid=self.grid)


def sample_inputs(
    d: int, grid: TimeGrid, order: int, bound: float, members: int, seed: int
) -> list[InputSignal]:
    """Draw `members` truncated-Fourier inputs; bit-reproducible per seed."""
    if order < 0 or bound <= 0 or members < 1:
        raise ValueError("need order >= 0, bound > 0, members >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    t = grid.quarter
    base = 2.0 * np.pi * t / grid.horizon
    out = []
    for _ in range(members):
        a = rng.uniform(-bound, bound, size=(d, order + 1))
        b = rng.uniform(-bound, bound, size=(d, order))
        vals = np.broadcast_to(a[:, 0], (t.shape[0], d)).copy()
        for k in range(1, order + 1):
            vals += np.outer(np.cos(k * base), a[:, k]) + np.outer(np.sin(k * base), b[:, k - 1])
        out.append(
            InputSignal(values=vals, grid=grid, fourier_order=order, coeff_bound=bound)
        )
    return out


def constant_inputs(d: int, grid: TimeGrid, value: float, members: int) -> list[InputSignal]:
    """Members all equal to a constant signal (degenerate ensemble)."""
    vals = np.full((4 * grid.steps + 1, d), float(value))
    return [InputSignal(values=vals.copy(), grid=grid) for _ in range(members)]


class TargetMap:
    """Maps an input trajectory to a target output path on the refined grid."""

    d_out: int

    def evaluate(self, signal: InputSignal) -> np.ndarray:
        raise NotImplementedError

    def directional(self, signal: InputSignal, h: InputSignal, eps: float = 1e-5) -> np.ndarray:
        """Directional derivative of the map along h; centered differences
        by default, exact in subclasses where the map is simple."""
        up = self.evaluate(signal.perturbed(h, eps))
        dn = self.evaluate(signal.perturbed(h, -eps))
        return (up - dn) / (2.0 * eps)


class PointwiseLinear(TargetMap):
    """Target is a fixed matrix applied to the input value at each time."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.d_out = self.matrix.shape[0]

    def evaluate(self, signal: InputSignal) -> np.ndarray:
        return signal.on_refined_grid() @ self.matrix.T

    def directional(self, signal, h, eps: float = 1e-5) -> np.ndarray:
        return h.on_refined_grid() @ self.matrix.T


class MovingAverage(TargetMap):
    """Trailing window average of the input, reflect-padded at the start.

    The window is snapped to a whole number of quarter-grid steps so the
    average is an exact trapezoid quadrature of the stored samples; the
    target stays continuous in time and equals the input for constants.
    """

    def __init__(self, window: float, d: int):
        if window <= 0:
            raise ValueError("window must be positive")
        self.window = float(window)
        self.d_out = d

    def _window_steps(self, grid: TimeGrid) -> int:
        dtq = grid.horizon / (4 * grid.steps)
        wq = max(1, int(round(self.window / dtq)))
        if wq > 4 * grid.steps:
            raise ValueError("moving-average window exceeds the horizon")
        return wq

    def _apply(self, values: np.ndarray, grid: TimeGrid) -> np.ndarray:
        wq = self._window_steps(grid)
        dtq = grid.horizon / (4 * grid.steps)
        ext = np.concatenate([values[wq:0:-1], values], axis=0)
        mids = 0.5 * (ext[:-1] + ext[1:]) * dtq
        cum = np.concatenate([np.zeros((1, values.shape[1])), np.cumsum(mids, axis=0)])
        avg = (cum[wq:] - cum[:-wq]) / (wq * dtq)
        return avg[::2]

    def evaluate(self, signal: InputSignal) -> np.ndarray:
        if signal.channels != self.d_out:
            raise ValueError("moving-average target needs d_out == d")
        return self._apply(signal.values, signal.grid)

    def directional(self, signal, h, eps: float = 1e-5) -> np.ndarray:
        return self._apply(h.values, signal.grid)


class TeacherSSM(TargetMap):
    """Targets produced by a frozen model under a frozen admissible control,
    read out on the same grid and solver as the student; guarantees the
    data-fit term can be driven to zero."""

    def __init__(self, model: DynamicsModel, control: ControlTrajectory):
        self.model = model
        self.control = control
        self.d_out = model.dims.d_out

    def evaluate(self, signal: InputSignal) -> np.ndarray:
        x = dynamics.forward_solve(self.model, self.control, signal, signal.grid)
        return x.values @ self.model.readout.T

    def directional(self, signal, h, eps: float = 1e-5) -> np.ndarray:
        z = dynamics.variational_solve_state(self.model, self.control, signal, h, signal.grid)
        return z @ self.model.readout.T


@dataclass(frozen=True)
class EnsembleBatch:
    """Sampled inputs with their target paths and uniform member weights."""

    grid: TimeGrid
    inputs: np.ndarray    # (M, 4N+1, d)
    targets: np.ndarray   # (M, 2N+1, d_out)
    input_bound: float    # certified per-channel sup of the input region
    target_sup: float = field(default=0.0)

    def __post_init__(self):
        if self.inputs.ndim != 3 or self.targets.ndim != 3:
            raise ValueError("inputs and targets must be 3-d stacks")
        if self.inputs.shape[0] != self.targets.shape[0] or self.inputs.shape[0] < 1:
            raise ValueError("need one target path per member, at least one member")
        sup = float(np.max(np.linalg.norm(self.targets, axis=-1))) if self.targets.size else 0.0
        object.__setattr__(self, "target_sup", sup)

    @property
    def members(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[2]

    @property
    def d_out(self) -> int:
        return self.targets.shape[2]

    def member_signal(self, i: int) -> InputSignal:
        return InputSignal(values=self.inputs[i], grid=self.grid)

    def save_csv(self, path) -> None:
        """One row per (member, quarter-grid sample time); target columns are
        present only on the refined (node/half-node) times where targets live."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["member", "t"]
                + [f"w_{j + 1}" for j in range(self.d)]
                + [f"target_{j + 1}" for j in range(self.d_out)]
            )
            for i in range(self.members):
                for q, t in enumerate(self.grid.quarter):
                    row = [str(i), repr(float(t))]
                    row += [repr(float(v)) for v in self.inputs[i, q]]
                    if q % 2 == 0:
                        row += [repr(float(v)) for v in self.targets[i, q // 2]]
                    else:
                        row += [""] * self.d_out
                    writer.writerow(row)

    @staticmethod
    def load_csv(path, grid: TimeGrid, input_bound: float | None = None) -> "EnsembleBatch":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            d = sum(1 for name in header if name.startswith("w_"))
            d_out = sum(1 for name in header if name.startswith("target_"))
            rows = list(reader)
        n_q = 4 * grid.steps + 1
        if len(rows) % n_q != 0:
            raise ValueError("row count does not match the grid")
        members = len(rows) // n_q
        inputs = np.empty((members, n_q, d))
        targets = np.empty((members, 2 * grid.steps + 1, d_out))
        for idx, row in enumerate(rows):
            i, q = divmod(idx, n_q)
            inputs[i, q] = [float(v) for v in row[2 : 2 + d]]
            if q % 2 == 0:
                targets[i, q // 2] = [float(v) for v in row[2 + d :]]
        bound = float(np.max(np.abs(inputs))) if input_bound is None else input_bound
        return EnsembleBatch(grid=grid, inputs=inputs, targets=targets, input_bound=bound)


def build_targets(
    target_map: TargetMap,
    inputs: list[InputSignal],
    input_bound: float | None = None,
) -> EnsembleBatch:
    """Evaluate the target map on every member and stack the batch."""
    if not inputs:
        raise ValueError("need at least one input signal")
    grid = inputs[0].grid
    if isinstance(target_map, TeacherSSM) and not np.isfinite(
        target_map.control.values
    ).all():
        raise ValueError("teacher control must be finite")
    stacked = np.stack([sig.values for sig in inputs])
    targets = np.stack([target_map.evaluate(sig) for sig in inputs])
    if input_bound is None:
        gen = [
            s.coeff_bound * (1 + 2 * s.fourier_order)
            for s in inputs
            if s.coeff_bound is not None and s.fourier_order is not None
        ]
        input_bound = max(gen) if len(gen) == len(inputs) else float(np.max(np.abs(stacked)))
    return EnsembleBatch(
        grid=grid, inputs=stacked, targets=targets, input_bound=float(input_bound)
    )


def expectation(values: np.ndarray) -> np.ndarray:
    """Ensemble average: arithmetic mean over the member axis, fixed order."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 1:
        raise ValueError("need at least one member")
    return np.mean(values, axis=0)

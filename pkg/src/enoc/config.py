"""Run configuration: one sectioned TOML file fully determines a run.

No environment variables are consulted; together with the seeds recorded in
the file, a config reproduces a run bit-for-bit.  `build_setup` turns the
parsed file into live objects (grid, model, ensemble, weights, certificate)
and resolves `beta = "auto:<kappa>"` to the numeric kappa * beta_threshold.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .constants import CertificateReport, compute_constants, resolve_auto_beta
from .core import ControlSet, ControlTrajectory, CostWeights, TimeGrid
from .ensemble import (
    EnsembleBatch,
    MovingAverage,
    PointwiseLinear,
    TargetMap,
    TeacherSSM,
    build_targets,
    constant_inputs,
    sample_inputs,
)
from .errors import ConfigError
from .models import DynamicsModel, declare_or_estimate_bounds, make_model
from .msa import MsaConfig


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return _toml.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}")


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name)
    if sec is None:
        raise ConfigError("section missing", field=name)
    if not isinstance(sec, dict):
        raise ConfigError("must be a table", field=name)
    return sec


def _get(sec: dict, section: str, key: str, types, default=_toml):
    if key not in sec:
        if default is _toml:
            raise ConfigError("required key missing", field=f"{section}.{key}")
        return default
    val = sec[key]
    if not isinstance(val, types) or (types is float and isinstance(val, bool)):
        raise ConfigError(
            f"expected {types}, got {type(val).__name__}", field=f"{section}.{key}"
        )
    return val


def _number(sec, section, key, default=_toml) -> float:
    v = _get(sec, section, key, (int, float), default)
    if isinstance(v, bool):
        raise ConfigError("expected a number", field=f"{section}.{key}")
    return float(v)


@dataclass
class RunSetup:
    raw: dict
    grid: TimeGrid
    model: DynamicsModel
    control_set: ControlSet
    batch: EnsembleBatch
    target_map: TargetMap
    weights: CostWeights
    certificate: CertificateReport
    msa_cfg: MsaConfig
    input_bound: float
    eta: float | None
    dump_trajectories: bool
    dump_ensemble: bool
    check_seed: int


def _build_model(raw: dict) -> DynamicsModel:
    sec = _section(raw, "model")
    kind = _get(sec, "model", "kind", str)
    if kind not in ("linear", "s4", "s6"):
        raise ConfigError(f"unknown kind {kind!r}", field="model.kind")
    d = int(_number(sec, "model", "d"))
    readout = sec.get("readout", "identity")
    if not isinstance(readout, str):
        readout = np.asarray(readout, dtype=float)
    x0 = sec.get("x0")
    kwargs = dict(d=d, readout=readout, x0=None if x0 is None else np.asarray(x0, float))
    if "d_out" in sec:
        kwargs["d_out"] = int(_number(sec, "model", "d_out"))
    if kind == "linear":
        kwargs["n"] = int(_number(sec, "model", "n"))
    else:
        kwargs["n_state"] = int(_number(sec, "model", "n_state"))
    if kind == "s6":
        kwargs["delta"] = _number(sec, "model", "delta", default=1.0)
    try:
        return make_model(kind, **kwargs)
    except Exception as exc:
        raise ConfigError(str(exc), field="model")


def _build_control_set(raw: dict, m: int) -> ControlSet:
    sec = _section(raw, "control")
    lo = sec.get("lower")
    hi = sec.get("upper")
    if lo is None or hi is None:
        raise ConfigError("lower and upper are required", field="control")
    lo = np.full(m, float(lo)) if isinstance(lo, (int, float)) else np.asarray(lo, float)
    hi = np.full(m, float(hi)) if isinstance(hi, (int, float)) else np.asarray(hi, float)
    if lo.shape != (m,) or hi.shape != (m,):
        raise ConfigError(
            f"bounds must be scalars or length-{m} lists", field="control"
        )
    try:
        return ControlSet(lower=lo, upper=hi)
    except ValueError as exc:
        raise ConfigError(str(exc), field="control")


def _build_target_map(
    raw: dict, model: DynamicsModel, control_set: ControlSet, grid: TimeGrid
) -> TargetMap:
    sec = _section(raw, "ensemble")
    tsec = sec.get("target")
    if not isinstance(tsec, dict):
        raise ConfigError("target table is required", field="ensemble.target")
    kind = _get(tsec, "ensemble.target", "kind", str)
    if kind == "pointwise_linear":
        mat = tsec.get("matrix")
        if mat is None:
            raise ConfigError("matrix is required", field="ensemble.target.matrix")
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        if mat.shape != (model.dims.d_out, model.dims.d):
            raise ConfigError(
                f"matrix must be ({model.dims.d_out}, {model.dims.d})",
                field="ensemble.target.matrix",
            )
        return PointwiseLinear(mat)
    if kind == "moving_average":
        window = _number(tsec, "ensemble.target", "window")
        if model.dims.d_out != model.dims.d:
            raise ConfigError(
                "moving-average targets need d_out == d", field="ensemble.target"
            )
        return MovingAverage(window=window, d=model.dims.d)
    if kind == "teacher":
        seed = int(_number(tsec, "ensemble.target", "seed", default=0))
        scale = _number(tsec, "ensemble.target", "scale", default=0.5)
        if not 0.0 <= scale <= 1.0:
            raise ConfigError("scale must lie in [0, 1]", field="ensemble.target.scale")
        teacher = _build_model(raw)  # same architecture as the student
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        # convex combination with the box center stays inside the box
        center = 0.5 * (control_set.lower + control_set.upper)
        point = center + scale * (control_set.sample(rng) - center)
        frozen = ControlTrajectory(
            values=np.broadcast_to(point, (grid.steps + 1, model.dims.m)).copy(),
            grid=grid,
        )
        return TeacherSSM(model=teacher, control=frozen)
    raise ConfigError(f"unknown target kind {kind!r}", field="ensemble.target.kind")


def build_setup(raw: dict, path_hint: str = "") -> RunSetup:
    """Materialize a parsed config: model, ensemble, weights, certificate."""
    gsec = _section(raw, "grid")
    try:
        grid = TimeGrid(
            horizon=_number(gsec, "grid", "horizon"),
            steps=int(_number(gsec, "grid", "steps")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), field="grid")

    model = _build_model(raw)
    control_set = _build_control_set(raw, model.dims.m)

    esec = _section(raw, "ensemble")
    members = int(_number(esec, "ensemble", "members"))
    if members < 1:
        raise ConfigError("members must be >= 1", field="ensemble.members")
    inputs_kind = _get(esec, "ensemble", "inputs", str, default="fourier")
    seed = int(_number(esec, "ensemble", "seed", default=0))
    if inputs_kind == "fourier":
        order = int(_number(esec, "ensemble", "fourier_order"))
        bound = _number(esec, "ensemble", "bound")
        if order < 0 or bound <= 0:
            raise ConfigError(
                "need fourier_order >= 0 and bound > 0", field="ensemble"
            )
        signals = sample_inputs(model.dims.d, grid, order, bound, members, seed)
        input_bound = bound * (1 + 2 * order)
    elif inputs_kind == "constant":
        value = _number(esec, "ensemble", "value")
        signals = constant_inputs(model.dims.d, grid, value, members)
        input_bound = abs(value)
        if input_bound == 0.0:
            input_bound = 1.0  # keep the input region nondegenerate
    else:
        raise ConfigError(f"unknown inputs kind {inputs_kind!r}", field="ensemble.inputs")

    target_map = _build_target_map(raw, model, control_set, grid)
    if isinstance(target_map, TeacherSSM) and not target_map.control.in_set(
        control_set, tol=1e-12
    ):
        raise ConfigError(
            "teacher control fell outside the control box", field="ensemble.target"
        )
    batch = build_targets(target_map, signals, input_bound=input_bound)

    bsec = raw.get("bounds", {})
    bounds = declare_or_estimate_bounds(
        model,
        control_set,
        input_bound,
        horizon=grid.horizon,
        target_sup=batch.target_sup,
        budget=int(_number(bsec, "bounds", "budget", default=2048)),
        seed=int(_number(bsec, "bounds", "seed", default=0)),
        safety=_number(bsec, "bounds", "safety", default=1.5),
    )
    model.bounds = bounds

    wsec = _section(raw, "weights")
    alpha = _number(wsec, "weights", "alpha")
    if alpha < 0:
        raise ConfigError("alpha must be >= 0", field="weights.alpha")
    beta_raw = wsec.get("beta")
    if isinstance(beta_raw, str):
        if not beta_raw.startswith("auto:"):
            raise ConfigError(
                "beta must be a positive number or 'auto:<kappa>'",
                field="weights.beta",
            )
        try:
            kappa = float(beta_raw.split(":", 1)[1])
        except ValueError:
            raise ConfigError("bad auto factor", field="weights.beta")
        if kappa <= 1.0:
            raise ConfigError("auto factor kappa must exceed 1", field="weights.beta")
        try:
            beta = resolve_auto_beta(bounds, grid.horizon, alpha, kappa, model.readout)
        except ValueError as exc:
            raise ConfigError(str(exc), field="weights.beta")
    elif isinstance(beta_raw, (int, float)) and not isinstance(beta_raw, bool):
        beta = float(beta_raw)
    else:
        raise ConfigError("beta is required", field="weights.beta")
    if beta <= 0:
        raise ConfigError("beta must be > 0", field="weights.beta")
    weights = CostWeights(alpha=alpha, beta=beta)
    certificate = compute_constants(bounds, grid.horizon, weights, model.readout)

    msec = _section(raw, "msa")
    u0 = _get(msec, "msa", "u0", str, default="zero")
    if u0 not in ("zero", "random"):
        raise ConfigError("u0 must be 'zero' or 'random'", field="msa.u0")
    try:
        msa_cfg = MsaConfig(
            max_iters=int(_number(msec, "msa", "max_iters")),
            delta_sup_tol=_number(msec, "msa", "delta_sup_tol", default=1e-7),
            inner_tol=_number(msec, "msa", "inner_tol", default=1e-10),
            inner_max=int(_number(msec, "msa", "inner_max", default=10_000)),
            u0=u0,
            u0_seed=int(_number(msec, "msa", "u0_seed", default=0)),
            check_descent=bool(_get(msec, "msa", "check_descent", bool, default=False)),
            record_paths=bool(_get(msec, "msa", "record_paths", bool, default=False)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), field="msa")

    osec = raw.get("output", {})
    eta = None
    if "baseline" in raw:
        eta = _number(raw["baseline"], "baseline", "eta")
        if eta < 0:
            raise ConfigError("eta must be >= 0", field="baseline.eta")

    resolved = _resolve_raw(raw, beta)
    return RunSetup(
        raw=resolved,
        grid=grid,
        model=model,
        control_set=control_set,
        batch=batch,
        target_map=target_map,
        weights=weights,
        certificate=certificate,
        msa_cfg=msa_cfg,
        input_bound=input_bound,
        eta=eta,
        dump_trajectories=bool(_get(osec, "output", "dump_trajectories", bool, default=False)),
        dump_ensemble=bool(_get(osec, "output", "dump_ensemble", bool, default=False)),
        check_seed=int(_number(raw.get("check", {}), "check", "seed", default=seed + 7919)),
    )


def _resolve_raw(raw: dict, beta: float) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    if isinstance(out.get("weights"), dict):
        out["weights"] = dict(out["weights"])
        out["weights"]["beta"] = beta
    return out


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def dump_resolved(raw: dict) -> str:
    """Canonical text echo of a (resolved) config dict."""
    lines: list[str] = []

    def emit(table: dict, prefix: str) -> None:
        scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
        subtables = {k: v for k, v in table.items() if isinstance(v, dict)}
        if prefix:
            lines.append(f"[{prefix}]")
        for k, v in scalars.items():
            lines.append(f"{k} = {_toml_value(v)}")
        if scalars or prefix:
            lines.append("")
        for k, v in subtables.items():
            emit(v, f"{prefix}.{k}" if prefix else k)

    emit(raw, "")
    return "\n".join(lines)


def load_setup(path) -> RunSetup:
    return build_setup(load_config(path), path_hint=str(path))


def write_resolved(setup: RunSetup, out_dir: Path) -> None:
    (out_dir / "config.resolved").write_text(dump_resolved(setup.raw))

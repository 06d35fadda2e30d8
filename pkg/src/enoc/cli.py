"""Command-line front end: train, baseline, certify, check.

Each command takes --config <file> plus --out <dir> and --workers <N>.
A run directory receives a verbatim resolved-config echo, the convergence
log, the final control, and the certificate; all outputs are deterministic
functions of the config file (timings go to a separate file).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import certify as cert
from .config import RunSetup, dump_resolved, load_setup
from .constants import sufficiency_thresholds
from .ensemble import sample_inputs
from .errors import DescentViolated, EnocError, InnerNotConverged, RankDeficientReadoutError
from .msa import (
    RunResult,
    baseline_gd_run,
    initial_control,
    msa_run,
    pmp_residual,
    write_convergence_csv,
    write_timing_csv,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def _fresh_dir(path: str) -> Path:
    out = Path(path)
    if out.exists() and any(out.iterdir()):
        raise EnocError(f"output directory {out} exists and is not empty")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_control_csv(result: RunResult, path: Path) -> None:
    vals = result.control.values
    with open(path, "w", newline="") as fh:
        fh.write("node," + ",".join(f"u_{j + 1}" for j in range(vals.shape[1])) + "\n")
        for i, row in enumerate(vals):
            fh.write(str(i) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def _write_trajectories_csv(setup: RunSetup, result: RunResult, path: Path) -> None:
    x_nodes = result.x[:, ::2]
    p_nodes = result.p
    n = x_nodes.shape[2]
    with open(path, "w", newline="") as fh:
        fh.write(
            "member,t,"
            + ",".join(f"x_{j + 1}" for j in range(n))
            + ","
            + ",".join(f"p_{j + 1}" for j in range(n))
            + "\n"
        )
        for mem in range(x_nodes.shape[0]):
            for i, t in enumerate(setup.grid.nodes):
                row = [str(mem), repr(float(t))]
                row += [repr(float(v)) for v in x_nodes[mem, i]]
                row += [repr(float(v)) for v in p_nodes[mem, i]]
                fh.write(",".join(row) + "\n")


def _certificate_with_thresholds(setup: RunSetup):
    try:
        return sufficiency_thresholds(setup.certificate)
    except RankDeficientReadoutError:
        return setup.certificate


def _write_run_outputs(setup: RunSetup, result: RunResult, out: Path) -> None:
    (out / "config.resolved").write_text(dump_resolved(setup.raw))
    write_convergence_csv(result.records, out / "convergence.csv")
    write_timing_csv(result.records, out / "timing.csv")
    _write_control_csv(result, out / "control_final.csv")
    (out / "certificate.txt").write_text(_certificate_with_thresholds(setup).to_text())
    if setup.dump_trajectories:
        _write_trajectories_csv(setup, result, out / "trajectories.csv")
    if setup.dump_ensemble:
        setup.batch.save_csv(out / "ensemble.csv")


def _final_residual(setup: RunSetup, result: RunResult, workers: int) -> float:
    return pmp_residual(
        setup.model, result.control, result.x, result.p, setup.batch,
        setup.weights, setup.grid, setup.control_set, setup.certificate,
        inner_tol=setup.msa_cfg.inner_tol, inner_max=setup.msa_cfg.inner_max,
        workers=workers,
    )


def cmd_train(args) -> int:
    setup = load_setup(args.config)
    out = _fresh_dir(args.out)
    result = msa_run(
        setup.model, setup.msa_cfg, setup.batch, setup.weights, setup.grid,
        setup.control_set, setup.certificate, workers=args.workers,
    )
    _write_run_outputs(setup, result, out)
    residual = _final_residual(setup, result, args.workers)
    print(f"iterations: {len(result.records)}  converged: {result.converged}")
    print(f"final cost: {result.final_cost!r}")
    print(f"final maximum-condition residual: {residual!r}")
    print(f"outputs in {out}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_baseline(args) -> int:
    setup = load_setup(args.config)
    if setup.eta is None:
        print("config error: baseline.eta is required for the baseline command",
              file=sys.stderr)
        return EXIT_ERROR
    out = _fresh_dir(args.out)
    result = baseline_gd_run(
        setup.model, setup.msa_cfg, setup.eta, setup.batch, setup.weights,
        setup.grid, setup.control_set, certificate=setup.certificate,
        workers=args.workers,
    )
    _write_run_outputs(setup, result, out)
    print(f"iterations: {len(result.records)}  converged: {result.converged}")
    print(f"final cost: {result.final_cost!r}")
    print(f"outputs in {out}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_certify(args) -> int:
    setup = load_setup(args.config)
    report = _certificate_with_thresholds(setup)
    text = report.to_text()
    print(text)
    if args.out:
        out = _fresh_dir(args.out)
        (out / "config.resolved").write_text(dump_resolved(setup.raw))
        (out / "certificate.txt").write_text(text)
    return EXIT_OK if report.beta_exceeds_threshold else EXIT_NOT_CONVERGED


def _smooth_directions(setup: RunSetup, count: int, seed: int) -> list[np.ndarray]:
    """Smooth control-space directions that keep u0 +- eps*dir inside the box."""
    grid, cs = setup.grid, setup.control_set
    m = cs.dim
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    phase = 2.0 * np.pi * grid.nodes / grid.horizon
    basis = np.stack([np.ones_like(phase), np.cos(phase), np.sin(phase), np.cos(2 * phase)])
    u0 = initial_control(setup.msa_cfg, cs, grid).values
    frozen = (cs.upper - cs.lower) <= 1e-15
    dirs = []
    for _ in range(count):
        coef = rng.standard_normal((4, m))
        d = np.einsum("bk,bm->km", basis, coef)
        d[:, frozen] = 0.0
        sup = np.max(np.abs(d))
        if sup > 0:
            d /= sup
        headroom = np.minimum(u0 - cs.lower, cs.upper - u0)
        margin = np.where(np.abs(d) > 0, headroom / np.maximum(np.abs(d), 1e-300), np.inf)
        scale = min(1.0, 0.5 * float(margin.min()))
        dirs.append(scale * d)
    return dirs


def cmd_check(args) -> int:
    setup = load_setup(args.config)
    workers = args.workers
    rows: list[tuple[str, float, float, bool]] = []

    grad_err = cert.fd_gradient_check(
        setup.model,
        initial_control(setup.msa_cfg, setup.control_set, setup.grid),
        setup.batch, setup.weights, setup.grid,
        directions=_smooth_directions(setup, 5, setup.check_seed),
        eps=1e-5, corrupt=args.corrupt_gradient,
    )
    rows.append(("adjoint_gradient_vs_fd", grad_err, 1e-3, grad_err <= 1e-3))

    h_dirs = sample_inputs(
        setup.model.dims.d, setup.grid, order=2,
        bound=max(0.5 * setup.input_bound / 5.0, 1e-3),
        members=2, seed=setup.check_seed + 1,
    )
    signals = [setup.batch.member_signal(i) for i in range(min(2, setup.batch.members))]
    u_check = initial_control(setup.msa_cfg, setup.control_set, setup.grid)
    var = cert.variational_fd_check(
        setup.model, u_check, signals, h_dirs, setup.target_map,
        setup.weights, setup.grid, eps=1e-4,
    )
    var_half = cert.variational_fd_check(
        setup.model, u_check, signals, h_dirs, setup.target_map,
        setup.weights, setup.grid, eps=5e-5,
    )
    rows.append(("input_sensitivity_vs_fd", var.worst, 1e-3, var.worst <= 1e-3))

    run_cfg = dataclasses.replace(
        setup.msa_cfg, max_iters=min(setup.msa_cfg.max_iters, 10), check_descent=False
    )
    result = msa_run(
        setup.model, run_cfg, setup.batch, setup.weights, setup.grid,
        setup.control_set, setup.certificate, workers=workers,
    )
    x_sup = max(max(r.x_sup for r in result.records),
                float(np.max(np.linalg.norm(result.x, axis=-1))))
    p_sup = max(max(r.p_sup for r in result.records),
                float(np.max(np.linalg.norm(result.p, axis=-1))))
    audit = cert.bounds_audit(x_sup, p_sup, setup.certificate)
    margin = max(
        x_sup - audit.state_bound, p_sup - audit.adjoint_bound
    )
    rows.append(("a_priori_bounds", margin, 0.0, audit.passed))

    w_nodes = np.swapaxes(setup.batch.inputs[:, ::4], 0, 1)
    hess = cert.hessian_definiteness_sampled(
        setup.model, setup.grid.nodes, w_nodes,
        np.swapaxes(result.x[:, ::2], 0, 1), np.swapaxes(result.p, 0, 1),
        result.control.values, setup.weights,
        samples=500, seed=setup.check_seed + 2,
    )
    rows.append(("hessian_negative_sampled", hess.worst, 0.0, hess.passed))

    print(f"{'check':32s} {'measured':>14s} {'tolerance':>12s}  status")
    for name, measured, tol, ok in rows:
        print(f"{name:32s} {measured:14.6e} {tol:12.3e}  {'pass' if ok else 'FAIL'}")
    if var.state_remainder > 0 and var_half.state_remainder > 0:
        ratio = var.state_remainder / var_half.state_remainder
        print(f"# sensitivity remainder ratio under eps halving: {ratio:.2f}")
    if args.out:
        out = _fresh_dir(args.out)
        (out / "config.resolved").write_text(dump_resolved(setup.raw))
        with open(out / "checks.csv", "w") as fh:
            fh.write("check,measured,tolerance,passed\n")
            for name, measured, tol, ok in rows:
                fh.write(f"{name},{measured!r},{tol!r},{str(ok).lower()}\n")
    return EXIT_OK if all(ok for *_x, ok in rows) else EXIT_NOT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="enoc",
        description="Ensemble optimal-control training for continuous-time "
                    "state-space models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out: bool):
        p.add_argument("--config", required=True, help="path to the TOML run config")
        p.add_argument("--out", required=needs_out, default=None,
                       help="fresh output directory")
        p.add_argument("--workers", type=int, default=1,
                       help="worker threads (results are worker-count invariant)")

    p_train = sub.add_parser("train", help="run the successive-approximation trainer")
    common(p_train, needs_out=True)
    p_train.set_defaults(func=cmd_train)

    p_base = sub.add_parser("baseline", help="run the projected-gradient baseline")
    common(p_base, needs_out=True)
    p_base.set_defaults(func=cmd_baseline)

    p_cert = sub.add_parser("certify", help="compute the certificate without training")
    common(p_cert, needs_out=False)
    p_cert.set_defaults(func=cmd_certify)

    p_check = sub.add_parser("check", help="run the verification suite")
    common(p_check, needs_out=False)
    p_check.add_argument("--corrupt-gradient", action="store_true",
                         help="negative control: corrupt the adjoint gradient")
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DescentViolated, InnerNotConverged) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except EnocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

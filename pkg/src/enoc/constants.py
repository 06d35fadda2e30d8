"""Explicit constants backing the convergence and optimality certificates.

All quantities are closed-form functions of the declared model bounds, the
horizon, the cost weights, and the readout's extreme singular values:

    state_bound      = (x0_sup + T b_sup) exp(T a_sup)
    adjoint_bound    = 2 alpha T |C| (|C| state_bound + target_sup) exp(T a_sup)
    state_rate       = a_sup state_bound + b_sup
    adjoint_rate     = a_sup adjoint_bound + 2 alpha |C| (|C| state_bound + target_sup)
    control_gain     = (du_a state_bound + du_b) exp(a_sup T)
    curvature_error  = (1/2) control_gain T (adjoint_bound du_a
                        + alpha |C|^2 control_gain T)
    beta_threshold   = (1/2) adjoint_bound (d2u_a state_bound + d2u_b)
                        + curvature_error
    concavity        = 2 beta - adjoint_bound (d2u_a state_bound + d2u_b)
    descent_rate     = concavity / 2 - curvature_error  (= beta - beta_threshold)
    ascent_lipschitz = 2 beta + adjoint_bound (d2u_a state_bound + d2u_b)

Each constant is monotone nondecreasing in every bound, so conservative
bounds only weaken (never invalidate) the certified inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import CostWeights
from .errors import RankDeficientReadoutError
from .models import ModelBounds


@dataclass(frozen=True)
class CertificateReport:
    """Certified constants plus threshold flags for one problem instance."""

    alpha: float
    beta: float
    horizon: float
    readout_norm: float       # largest singular value of C
    readout_min_sv: float     # smallest singular value of C
    bounds: ModelBounds

    state_bound: float        # sup |x| over admissible pairs
    adjoint_bound: float      # sup |p|
    state_rate: float         # Lipschitz-in-time constant of x
    adjoint_rate: float       # Lipschitz-in-time constant of p
    control_gain: float       # state response per unit integrated control change
    curvature_error: float    # second-order expansion error coefficient
    beta_threshold: float     # penalty weight above which descent is certified
    concavity: float          # strong-concavity modulus of the control update
    descent_rate: float       # certified cost decrease per squared L2 update
    ascent_lipschitz: float   # gradient Lipschitz constant of the inner ascent

    alpha_min: float | None = None
    beta_min_sufficient: float | None = None

    @property
    def beta_exceeds_threshold(self) -> bool:
        return self.beta > self.beta_threshold

    @property
    def alpha_exceeds_min(self) -> bool:
        return self.alpha_min is not None and self.alpha > self.alpha_min

    @property
    def beta_exceeds_sufficient(self) -> bool:
        return self.beta_min_sufficient is not None and self.beta > self.beta_min_sufficient

    @property
    def bounds_sampled_not_certified(self) -> bool:
        return self.bounds.sampled

    def to_text(self) -> str:
        lines = [
            "# convergence certificate",
            (
                "# descent is certified iff beta > beta_threshold; "
                "sufficiency additionally needs alpha > alpha_min and "
                "beta > beta_min_sufficient"
            ),
            "",
            "[weights]",
            f"alpha = {self.alpha!r}",
            f"beta = {self.beta!r}",
            f"horizon = {self.horizon!r}",
            "",
            "[model_bounds]",
            f"a_sup = {self.bounds.a_sup!r}",
            f"b_sup = {self.bounds.b_sup!r}",
            f"du_a_sup = {self.bounds.du_a_sup!r}",
            f"du_b_sup = {self.bounds.du_b_sup!r}",
            f"d2u_a_sup = {self.bounds.d2u_a_sup!r}",
            f"d2u_b_sup = {self.bounds.d2u_b_sup!r}",
            f"target_sup = {self.bounds.target_sup!r}",
            f"x0_sup = {self.bounds.x0_sup!r}",
            f"readout_norm = {self.readout_norm!r}",
            f"readout_min_sv = {self.readout_min_sv!r}",
            "",
            "[constants]",
            f"state_bound = {self.state_bound!r}",
            f"adjoint_bound = {self.adjoint_bound!r}",
            f"state_rate = {self.state_rate!r}",
            f"adjoint_rate = {self.adjoint_rate!r}",
            f"control_gain = {self.control_gain!r}",
            f"curvature_error = {self.curvature_error!r}",
            f"beta_threshold = {self.beta_threshold!r}",
            f"concavity = {self.concavity!r}",
            f"descent_rate = {self.descent_rate!r}",
            f"ascent_lipschitz = {self.ascent_lipschitz!r}",
            "",
            "[thresholds]",
        ]
        if self.alpha_min is not None:
            lines.append(f"alpha_min = {self.alpha_min!r}")
        if self.beta_min_sufficient is not None:
            lines.append(f"beta_min_sufficient = {self.beta_min_sufficient!r}")
        lines += [
            "",
            "[flags]",
            f"beta_exceeds_threshold = {str(self.beta_exceeds_threshold).lower()}",
            f"alpha_exceeds_min = {str(self.alpha_exceeds_min).lower()}",
            f"beta_exceeds_sufficient = {str(self.beta_exceeds_sufficient).lower()}",
            f"bounds_sampled_not_certified = {str(self.bounds_sampled_not_certified).lower()}",
            "",
            "# summary:",
            f"#   certified descent: {'yes' if self.beta_exceeds_threshold else 'NO'} "
            f"(beta {self.beta:.6g} vs threshold {self.beta_threshold:.6g}, "
            f"rate {self.descent_rate:.6g} per squared L2 update)",
            f"#   global optimality at the limit: "
            f"{'yes' if self.alpha_exceeds_min and self.beta_exceeds_sufficient else 'not established'}",
            f"#   bound provenance: "
            f"{'sampled suprema x safety factor (not certified)' if self.bounds.sampled else 'closed form'}",
            "",
        ]
        return "\n".join(lines)


def readout_singular_values(readout: np.ndarray) -> tuple[float, float]:
    sv = np.linalg.svd(np.asarray(readout, dtype=float), compute_uv=False)
    return float(sv[0]), float(sv[-1])


def compute_constants(
    bounds: ModelBounds,
    horizon: float,
    weights: CostWeights,
    readout: np.ndarray,
) -> CertificateReport:
    """Evaluate every certificate constant for the given instance."""
    cmax, cmin = readout_singular_values(readout)
    t = float(horizon)
    alpha, beta = weights.alpha, weights.beta

    growth = np.exp(t * bounds.a_sup)
    state_bound = (bounds.x0_sup + t * bounds.b_sup) * growth
    drive = cmax * state_bound + bounds.target_sup
    adjoint_bound = 2.0 * alpha * t * cmax * drive * growth
    state_rate = bounds.a_sup * state_bound + bounds.b_sup
    adjoint_rate = bounds.a_sup * adjoint_bound + 2.0 * alpha * cmax * drive

    control_gain = (bounds.du_a_sup * state_bound + bounds.du_b_sup) * growth
    curvature_error = 0.5 * control_gain * t * (
        adjoint_bound * bounds.du_a_sup + alpha * cmax**2 * control_gain * t
    )
    hess_term = adjoint_bound * (bounds.d2u_a_sup * state_bound + bounds.d2u_b_sup)
    beta_threshold = 0.5 * hess_term + curvature_error
    concavity = 2.0 * beta - hess_term
    descent_rate = 0.5 * concavity - curvature_error
    ascent_lipschitz = 2.0 * beta + hess_term

    return CertificateReport(
        alpha=alpha,
        beta=beta,
        horizon=t,
        readout_norm=cmax,
        readout_min_sv=cmin,
        bounds=bounds,
        state_bound=float(state_bound),
        adjoint_bound=float(adjoint_bound),
        state_rate=float(state_rate),
        adjoint_rate=float(adjoint_rate),
        control_gain=float(control_gain),
        curvature_error=float(curvature_error),
        beta_threshold=float(beta_threshold),
        concavity=float(concavity),
        descent_rate=float(descent_rate),
        ascent_lipschitz=float(ascent_lipschitz),
    )


def sufficiency_thresholds(report: CertificateReport) -> CertificateReport:
    """Attach the global-optimality thresholds for the weights.

    alpha must exceed 1 / (2 lambda_min(C^T C)); beta must exceed the
    concavity threshold plus max(curvature_error, adjoint_bound^2 du_a^2 / 2).
    """
    cmin2 = report.readout_min_sv**2
    if cmin2 <= 1e-12 * report.readout_norm**2:
        raise RankDeficientReadoutError(
            f"readout smallest singular value {report.readout_min_sv:.3e} is "
            f"numerically zero relative to its norm {report.readout_norm:.3e}"
        )
    alpha_min = 1.0 / (2.0 * cmin2)
    hess_term = report.bounds.d2u_a_sup * report.state_bound + report.bounds.d2u_b_sup
    beta_min = 0.5 * report.adjoint_bound * hess_term + max(
        report.curvature_error,
        0.5 * report.adjoint_bound**2 * report.bounds.du_a_sup**2,
    )
    return replace(report, alpha_min=float(alpha_min), beta_min_sufficient=float(beta_min))


def resolve_auto_beta(
    bounds: ModelBounds,
    horizon: float,
    alpha: float,
    kappa: float,
    readout: np.ndarray,
) -> float:
    """beta = kappa * beta_threshold with kappa > 1 (threshold is beta-free)."""
    if kappa <= 1.0:
        raise ValueError(f"auto beta factor must exceed 1, got {kappa}")
    probe = compute_constants(bounds, horizon, CostWeights(alpha=alpha, beta=1.0), readout)
    if probe.beta_threshold <= 0.0:
        raise ValueError(
            "beta_threshold is zero for this instance (alpha = 0); "
            "set beta explicitly instead of auto"
        )
    return float(kappa * probe.beta_threshold)

"""Ensemble optimal-control training for continuous-time state-space models.

A single control signal (the model parameters as functions of time) drives
one linear-in-state system per sampled input trajectory; training minimizes
the averaged data-fit plus control-effort cost.  The package provides the
forward/adjoint/sensitivity solvers, a successive-approximation trainer
built on per-time Hamiltonian maximization, explicit certificate constants
for its descent guarantee, and a verification suite, behind both a library
API and the `enoc` command line.
"""

from .constants import (
    CertificateReport,
    compute_constants,
    resolve_auto_beta,
    sufficiency_thresholds,
)
from .core import (
    AdjointPath,
    ControlSet,
    ControlTrajectory,
    CostWeights,
    StatePath,
    TimeGrid,
    l2_norm_time,
    project_onto_control_set,
    sup_norm_time,
)
from .dynamics import (
    backward_solve,
    forward_solve,
    variational_solve_adjoint,
    variational_solve_state,
)
from .ensemble import (
    EnsembleBatch,
    InputSignal,
    MovingAverage,
    PointwiseLinear,
    TeacherSSM,
    build_targets,
    constant_inputs,
    expectation,
    sample_inputs,
)
from .errors import (
    ConfigError,
    DescentViolated,
    EnocError,
    InnerNotConverged,
    ModelDefinitionError,
    NonFiniteAdjointError,
    NonFiniteStateError,
    RankDeficientReadoutError,
)
from .hamiltonian import (
    HamiltonianContext,
    hamiltonian_eval,
    hamiltonian_grad_u,
    hamiltonian_hess_quadform,
    maximize_hamiltonian,
)
from .models import (
    DiagS4,
    DynamicsModel,
    LinearSSM,
    ModelBounds,
    SelectiveS6,
    declare_or_estimate_bounds,
    fd_derivative_fallback,
    make_model,
)
from .msa import (
    IterationRecord,
    MsaConfig,
    RunResult,
    baseline_gd_run,
    cost_eval,
    msa_run,
    msa_step,
    pmp_residual,
)

__version__ = "0.1.0"

"""Exception types shared across the package."""

from __future__ import annotations


class EnocError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EnocError):
    """A run configuration file is malformed or inconsistent."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ModelDefinitionError(EnocError):
    """Model dimensions or parameters are inconsistent."""


class NonFiniteStateError(EnocError):
    """A forward solve produced an overflowing or NaN state."""


class NonFiniteAdjointError(EnocError):
    """A backward solve produced an overflowing or NaN adjoint."""


class RankDeficientReadoutError(EnocError):
    """The readout matrix is (numerically) rank deficient."""


class InnerNotConverged(EnocError):
    """The per-node ascent hit its iteration cap above tolerance.

    Usually signals a nonconcave node problem (penalty weight too small)
    or an unreachable tolerance.
    """

    def __init__(self, node: int, residual: float, max_inner: int):
        self.node = node
        self.residual = residual
        self.max_inner = max_inner
        super().__init__(
            f"inner ascent at node {node} stopped after {max_inner} steps "
            f"with residual {residual:.3e}"
        )


class DescentViolated(EnocError):
    """The certified per-iteration cost decrease failed at some iteration.

    Signals bounds that are too loose for the instance, an inner tolerance
    that is too slack, or a time grid too coarse for the slack term.
    """

    def __init__(self, iteration: int, lhs: float, rhs: float):
        self.iteration = iteration
        self.lhs = lhs
        self.rhs = rhs
        super().__init__(
            f"descent inequality violated at iteration {iteration}: "
            f"cost change {lhs:.6e} > bound {rhs:.6e}"
        )

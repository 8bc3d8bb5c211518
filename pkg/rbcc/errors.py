"""Exception hierarchy for rbcc.

Every error carries the process exit code the CLI reports for it:
2 for configuration problems, 3 for numerical failures, 4 for I/O.
"""


class RBCCError(Exception):
    """Base class for all rbcc errors."""

    exit_code = 1


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


class ConfigError(RBCCError):
    """Raised when a scenario cannot be loaded."""

    exit_code = 2


class ConfigParseError(ConfigError):
    """Raised for a malformed line in a config file."""

    def __init__(self, source: str, line_no: int, reason: str):
        self.source = source
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{source}:{line_no}: {reason}")


class ConfigValidationError(ConfigError):
    """Raised when a parsed value violates a parameter invariant."""

    def __init__(self, messages: list[str]):
        self.messages = messages
        super().__init__("; ".join(messages))


# ---------------------------------------------------------------------------
# Numerics
# ---------------------------------------------------------------------------


class NumericalError(RBCCError):
    """Base class for solver and integrator failures."""

    exit_code = 3


class StepSizeUnderflowError(NumericalError):
    """Raised when the adaptive step shrinks below machine resolution."""

    def __init__(self, t: float, h: float):
        self.t = t
        self.h = h
        super().__init__(f"step size underflow at t={t:.6g} s (h={h:.3g} s)")


class NonFiniteStateError(NumericalError):
    """Raised when the right-hand side produces NaN or Inf."""

    def __init__(self, t: float, state: object):
        self.t = t
        self.state = state
        super().__init__(f"non-finite derivative at t={t:.6g} s, state={state}")


class NegativeStateError(NumericalError):
    """Raised when a density goes below -abs_tol."""

    def __init__(self, t: float, state: object):
        self.t = t
        self.state = state
        super().__init__(f"negative density at t={t:.6g} s, state={state}")


class ConvergenceError(NumericalError):
    """Raised when a bracketed root solve does not converge."""

    def __init__(self, what: str, lo: float, hi: float, iterations: int):
        self.what = what
        self.bracket = (lo, hi)
        self.iterations = iterations
        super().__init__(
            f"{what} did not converge after {iterations} iterations "
            f"(bracket [{lo:.12g}, {hi:.12g}])"
        )


class OperatingRangeError(NumericalError):
    """Raised when an operating point is requested outside the physical range."""


class NotSettledError(NumericalError):
    """Raised when a trajectory has no steady segment within its horizon."""


class BelowThresholdError(NumericalError):
    """Raised for quantities that only exist above the lasing threshold."""


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


class OutputError(RBCCError):
    """Raised when results cannot be written."""

    exit_code = 4

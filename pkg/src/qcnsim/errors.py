"""Exception hierarchy.

Every error carries a short machine-readable ``category`` string which the
command line reports on failure.
"""


class QcnError(Exception):
    category = "error"


class LayoutError(QcnError, ValueError):
    category = "layout"


class ParameterError(QcnError, ValueError):
    category = "parameters"


class StateError(QcnError, ValueError):
    category = "state"


class ConfigError(QcnError, ValueError):
    category = "config"


class SolverError(QcnError, RuntimeError):
    category = "solver"


class StepSizeUnderflow(SolverError):
    category = "step_underflow"

    def __init__(self, t, h):
        super().__init__(f"step size underflow at t={t:.6g} (h={h:.3g})")
        self.t = t
        self.h = h


class TraceDriftError(SolverError):
    category = "trace_drift"


class NonUniqueSteadyState(SolverError):
    category = "nonunique_steady_state"


class ConvergenceError(QcnError, RuntimeError):
    category = "truncation_convergence"


class WindowTruncationError(QcnError, ValueError):
    category = "window_truncation"

"""
Exception hierarchy shared by the library and the command-line front end.

Every exception carries the process exit code the CLI reports for it.
"""


class InfoDesignError(Exception):
    exit_code = 1


# --- Configuration / validation failures (exit 2) ---
class ConfigurationError(InfoDesignError):
    exit_code = 2


class DimensionError(ConfigurationError):
    pass


class OutOfSupportError(ConfigurationError):
    def __init__(self, theta, message=None):
        self.theta = theta
        super().__init__(message or f"theta={list(map(float, theta))} lies outside the prior support")


# --- Numerical failures (exit 3) ---
class NumericalError(InfoDesignError):
    exit_code = 3


class CholeskyError(NumericalError):
    def __init__(self, what, theta=None, step=None):
        self.what = what
        self.theta = theta
        self.step = step
        detail = what
        if step is not None:
            detail += f" at step {step}"
        if theta is not None:
            detail += f" for theta={[float(t) for t in theta]}"
        super().__init__(f"matrix is not symmetric positive-definite: {detail}")

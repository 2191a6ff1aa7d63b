"""Shared exception types for the icplan package."""


class IcplanError(Exception):
    """Base class for every error raised by this package."""


class InstanceError(IcplanError, ValueError):
    """Malformed instance/solution file or inconsistent network data."""


class ConfigurationError(IcplanError, ValueError):
    """Problem specification that cannot be assembled into a model."""


class GuardExceeded(IcplanError, RuntimeError):
    """An enumeration guard refused to build or run (instance too large)."""


class SolverError(IcplanError, RuntimeError):
    """Backend failed, is unavailable, or returned an unusable status."""


class UnbalancedFlowError(IcplanError, ValueError):
    """Flow values do not satisfy conservation at some time-extended vertex."""

    def __init__(self, state, t, imbalance):
        self.state = state
        self.t = t
        self.imbalance = imbalance
        super().__init__(
            f"flow imbalance {imbalance:+.3g} at state {state!r}, layer {t}"
        )

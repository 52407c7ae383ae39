"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


class PrecoderInfeasible(ValueError):
    """The requested precoder cannot be built for the given antenna count."""


class PrelogInfeasible(ValueError):
    """Pilot overhead consumes the entire coherence interval."""


class ConvergenceFailure(RuntimeError):
    """A fixed-point iteration did not reach the requested tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class IllConditionedSystem(RuntimeError):
    """A linear system that should be well posed turned out singular."""


class DegenerateSamples(ValueError):
    """Monte Carlo samples carry no usable signal."""

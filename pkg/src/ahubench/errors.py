"""Exception hierarchy shared across the package."""


class AhuBenchError(Exception):
    pass


class DomainError(AhuBenchError, ValueError):
    """Input outside the validity range of a physical correlation."""


class ConfigError(AhuBenchError, ValueError):
    """Invalid scenario, controller or trainer configuration."""


class NumericalError(AhuBenchError, ArithmeticError):
    """Simulation state became non-finite."""


class PolicyFormatError(AhuBenchError, ValueError):
    """Policy file is malformed, truncated or of an unsupported version."""


class TrainingError(AhuBenchError, RuntimeError):
    """PPO optimisation diverged.

    ``last_good`` holds the most recent policy whose parameters were all finite.
    """

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good

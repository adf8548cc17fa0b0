"""Exception types shared across the package."""


class PrecisionExhausted(ArithmeticError):
    """A finite-precision orbit ran out of significant bits.

    ``step_index`` is the iteration at which the budget ran out (1-based),
    when known.
    """

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class InsufficientSample(ValueError):
    """Too few radii survived the empirical count floor."""


class InsufficientSignal(ValueError):
    """A correlation series has too few entries above the noise floor."""


class UndeterminedDecay(ValueError):
    """A decay model without a usable class was passed where one is required."""


class LadderNotDecreasing(ValueError):
    """A radius ladder does not produce strictly decreasing radii."""


class BranchBudgetExceeded(ValueError):
    """Exact preimage enumeration would need more than 2**24 branches."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class DivergenceWarning(UserWarning):
    """Partial sums of target measures are too small for a meaningful ratio."""

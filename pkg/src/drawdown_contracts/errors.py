"""Exception types raised by the pricing and simulation code."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested function."""


class UnsupportedModelError(ValueError):
    """The operation has no closed form for the given model."""


class UnsupportedConfigurationError(ValueError):
    """The contract configuration has no analytic price; use Monte Carlo."""


class DegenerateContractError(ValueError):
    """A fair premium does not exist because its denominator vanishes."""


class AdmissibilityError(ValueError):
    """The reward function makes the expected payout infinite."""

"""Exception types shared across the package."""


class FedcaError(Exception):
    """Base class for all library errors."""


class ValidationError(FedcaError):
    """Malformed input data or a violated operation precondition."""


class BudgetExceededError(FedcaError):
    """An exact search was refused because it would exceed its evaluation budget."""

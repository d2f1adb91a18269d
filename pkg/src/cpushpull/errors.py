"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument is out of range or has the wrong shape."""


class AssumptionError(ValueError):
    """Graphs or mixing matrices violate the connectivity/stochasticity requirements."""


class NumericalError(ArithmeticError):
    """An iteration failed to converge or produced non-finite values."""

    def __init__(self, msg, iteration=None):
        super().__init__(msg)
        self.iteration = iteration


class ParseError(ValueError):
    """Malformed dataset file. ``row`` is the 1-based line number when known."""

    def __init__(self, msg, row=None):
        super().__init__(msg if row is None else f"row {row}: {msg}")
        self.row = row


class ConfigError(ValueError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, msg, key=None):
        super().__init__(msg if key is None else f"{key}: {msg}")
        self.key = key

"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to distinct
process exit statuses without a lookup table scattered across commands.
"""


class PrivMailError(Exception):
    exit_code = 1


class ValidationError(PrivMailError, ValueError):
    exit_code = 2


class DimensionMismatch(ValidationError):
    pass


class ZeroRow(ValidationError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"row {index} has (near) zero norm and cannot be normalized")


class InvalidBandwidth(ValidationError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"kernel bandwidth must be positive, got {value!r}")


class TooFewRows(ValidationError):
    def __init__(self, n_rows, minimum=2):
        self.n_rows = n_rows
        super().__init__(f"need at least {minimum} rows, got {n_rows}")


class InvalidBudget(ValidationError):
    pass


class NonPositiveBound(PrivMailError, ArithmeticError):
    """The closed-form sensitivity constant is not a usable upper bound."""

    exit_code = 3

    def __init__(self, m_composite):
        self.m_composite = m_composite
        super().__init__(
            f"sensitivity constant M = {m_composite!r} is not positive; "
            "no valid global-sensitivity bound for these parameters"
        )


class DegenerateAnchors(PrivMailError, ValueError):
    exit_code = 4


class MissingClass(PrivMailError, ValueError):
    exit_code = 5

    def __init__(self, label):
        self.label = label
        super().__init__(f"public data has no exemplar of class {label}")


class ParseError(PrivMailError, ValueError):
    exit_code = 6

    def __init__(self, line, reason, path=None):
        self.line = line
        self.reason = reason
        self.path = path
        where = f"{path}:{line}" if path is not None else f"line {line}"
        super().__init__(f"{where}: {reason}")


class DuplicateId(ParseError):
    def __init__(self, identifier, line=None, path=None):
        self.identifier = identifier
        super().__init__(line, f"duplicate id {identifier!r}", path=path)


class ConfigError(PrivMailError, ValueError):
    exit_code = 7

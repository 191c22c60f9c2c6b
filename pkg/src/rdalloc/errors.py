"""Exception hierarchy shared across the package."""


class RdError(ValueError):
    """Base class for domain errors raised by rdalloc."""


class DegenerateDesignError(RdError):
    """The sample design cannot identify the surface parameters."""

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class TooFewSamplesError(DegenerateDesignError):
    pass


class UndefinedValueError(RdError):
    pass


class UnsupportedDimensionError(RdError):
    pass


class ParseError(RdError):
    """Malformed input file. Carries 1-based line and column when known."""

    def __init__(self, message, path=None, line=None, column=None):
        loc = ""
        if path is not None:
            loc += str(path)
        if line is not None:
            loc += f":{line}"
            if column is not None:
                loc += f":{column}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line
        self.column = column

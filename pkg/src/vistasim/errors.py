"""Exception taxonomy shared across the simulator."""


class ConfigurationError(Exception):
    """Bad experiment configuration: unknown keys, missing fields, mismatched dims."""


class PolicyError(Exception):
    """A threshold policy asked for something outside its admissible range."""


class ContractViolation(Exception):
    """An internal call broke a documented precondition (e.g. empty report set)."""


class SolverError(Exception):
    """The best-response solver could not produce a finite-utility answer."""


class ParseError(Exception):
    """A persisted artifact (curve table, results file) failed to parse."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class InvariantViolation(Exception):
    """A runtime check derived from the convergence analysis failed."""

"""Exception hierarchy shared across the pipeline.

The CLI maps these onto its exit-code taxonomy: bad arguments / missing
inputs exit 2, I/O and schema problems exit 3, numerical failures exit 4.
"""


class MyodecodeError(Exception):
    """Base class for errors raised by this package."""


class SchemaError(MyodecodeError):
    """A session file violates the CSV schema.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(MyodecodeError):
    """A linear-algebra step failed (singular system, non-finite values)."""

"""Exception hierarchy shared across the package.

DataFormatError covers malformed input files and streams; InfeasibleError
covers well-formed problems that admit no solution under the model.
"""


class DataFormatError(ValueError):
    """Malformed input data (file, stream, or text stanza).

    The optional byte or line offset of the first bad element is kept on
    the instance so tools can point at the failure.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class ContourFormatError(DataFormatError):
    pass


class PgmFormatError(DataFormatError):
    pass


class TreeFormatError(DataFormatError):
    pass


class BitstreamFormatError(DataFormatError):
    pass


class InfeasibleError(RuntimeError):
    """No solution exists under the model constraints."""


class AlignmentInfeasibleError(InfeasibleError):
    pass


class RateBudgetError(InfeasibleError):
    pass

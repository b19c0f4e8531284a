"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures
to the documented process status without a lookup table.
"""


class RCSError(Exception):
    exit_code = 1


class ParseError(RCSError):
    exit_code = 2

    def __init__(self, message, *, line=None, column=None, offset=None):
        super().__init__(message)
        self.line = line
        self.column = column
        self.offset = offset


class ValidationError(RCSError):
    exit_code = 3


class InvalidCutError(ValidationError):
    pass


class CoverageError(ValidationError):
    pass


class NotFactorizableError(ValidationError):
    pass


class InsufficientDataError(ValidationError):
    pass


class ConvergenceError(RCSError):
    exit_code = 3

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class FeasibilityError(ValidationError):
    pass


class AlignmentError(RCSError):
    exit_code = 4


class MissingProbabilityError(AlignmentError):
    def __init__(self, bitstring):
        super().__init__(f"no probability available for bitstring {bitstring}")
        self.bitstring = bitstring


class MissingResponseError(AlignmentError):
    pass


class IntegrityError(AlignmentError):
    pass


class UsageError(RCSError):
    exit_code = 64


class CapacityError(RCSError):
    exit_code = 65

"""Exception types shared across the package."""


class SingularMatrixError(ValueError):
    """Matrix inversion failed: the operand is singular or numerically rank-deficient."""


class NotIdentifiableError(SingularMatrixError):
    """The parameter is not identifiable from the obfuscated measurements."""


class UnsupportedFamilyError(ValueError):
    """The requested operation has no defined value for this noise family."""


class CalibrationError(ValueError):
    """No mechanism parameter meets the requested information budget."""


class ScenarioError(ValueError):
    """A configuration file is malformed; the message names the offending field."""

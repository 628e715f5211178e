"""Exception hierarchy.

Three top-level families map onto CLI exit codes: configuration problems (2),
data problems (3) and numerical failures (4).  Argument-validation errors also
derive from ``ValueError`` so callers can catch them the usual way.
"""


class VmdTexError(Exception):
    exit_code = 1


class ConfigError(VmdTexError):
    exit_code = 2


class DataError(VmdTexError):
    exit_code = 3


class NumericalError(VmdTexError):
    exit_code = 4


# -- dataset ---------------------------------------------------------------

class MalformedName(DataError, ValueError):
    pass


class EmptyDataset(DataError):
    pass


class ConflictingPatientClass(DataError):
    pass


class ConflictingLabel(DataError):
    """Filename class code disagrees with the enclosing benign/malignant directory."""


class DecodeError(DataError):
    pass


class TooFewPatients(DataError, ValueError):
    pass


class UnknownPatient(DataError, KeyError):
    pass


class LengthMismatch(DataError, ValueError):
    pass


class EmptyEvaluation(DataError, ValueError):
    pass


# -- argument validation ---------------------------------------------------

class BadK(ConfigError, ValueError):
    pass


class BadOrder(ConfigError, ValueError):
    pass


class DimensionMismatch(DataError, ValueError):
    pass


class SingleClass(DataError, ValueError):
    pass


# -- numerics --------------------------------------------------------------

class NonFinite(NumericalError, FloatingPointError):
    pass


class IllConditioned(NumericalError):
    pass


class DegenerateMode(NumericalError):
    pass


class DegenerateImage(NumericalError, ValueError):
    pass

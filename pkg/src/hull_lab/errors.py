"""Exception types raised across the package."""


class HullLabError(Exception):
    pass


class DimensionMismatchError(HullLabError, ValueError):
    pass


class NoSeparationError(HullLabError):
    pass


class EmptyDomainError(HullLabError):
    pass


class FieldEvaluationError(HullLabError, ArithmeticError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ArityError(HullLabError, ValueError):
    pass


class StencilError(HullLabError):
    pass


class CollarTooThinError(HullLabError):
    pass


class NoCertificateError(HullLabError):
    pass


class SublevelSamplingError(HullLabError):
    pass


class CertificateInvalidError(HullLabError):
    pass


class TheoremViolationError(HullLabError):
    pass


class PreconditionError(HullLabError, ValueError):
    pass


class CountUncertainError(HullLabError):
    def __init__(self, message, clusters=None):
        super().__init__(message)
        self.clusters = clusters or []


class HypothesisError(HullLabError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ConstructionError(HullLabError):
    pass


class ConfigError(HullLabError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column

"""Exception types raised across opwlab."""


class OpwlabError(Exception):
    """Base class for all library errors."""


class InvalidArgument(OpwlabError, ValueError):
    pass


class GridMismatch(InvalidArgument):
    """Two signals or an operator and a signal live on incompatible grids."""


class GridTooSmall(OpwlabError):
    pass


class ResolutionError(OpwlabError):
    """A requested scale is below what the grid spacing can resolve."""


class NumericalFailure(OpwlabError):
    pass


class SizeCapExceeded(OpwlabError):
    pass


class NotHilbertSchmidt(OpwlabError):
    """The operator's spreading function is distributional (a delta line)."""


class UndefinedRatio(OpwlabError, ZeroDivisionError):
    pass


class DivisionFloorError(OpwlabError):
    pass


class ConfigError(OpwlabError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)

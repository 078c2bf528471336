"""
Exception types raised by the coarray library.
Every error carries a machine-readable `category` so the harness and the CLI
can record failures without parsing messages.
"""


class CoarrayError(Exception):
    category = "error"

    def to_dict(self) -> dict:
        return {"error": str(self), "category": self.category}


class ParameterError(CoarrayError, ValueError):
    category = "parameter"


class ShapeError(CoarrayError, ValueError):
    category = "shape"


class IdentifiabilityError(CoarrayError):
    category = "identifiability"


class DegenerateResponseError(CoarrayError):
    category = "degenerate_response"


class AzimuthUndefinedError(CoarrayError):
    category = "azimuth_undefined"


class DegenerateIterationError(CoarrayError):
    category = "degenerate_iteration"


class ConvergenceError(CoarrayError):
    category = "convergence"


class IllConditionedError(CoarrayError):
    category = "ill_conditioned"


class OutOfRangeError(CoarrayError):
    category = "out_of_range"


class RankDeficiencyError(CoarrayError):
    category = "rank_deficiency"

    def __init__(self, message, null_directions=None):
        super().__init__(message)
        self.null_directions = null_directions


class ConfigError(CoarrayError):
    category = "config"


class ReportIOError(CoarrayError):
    category = "io"

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["path"] = str(self.path) if self.path is not None else None
        return out

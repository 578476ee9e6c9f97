"""Exception hierarchy.

Every error carries a stable ``code`` so the CLI can emit machine-readable
failures without string matching.
"""


class CalibkitError(Exception):
    code = "calibkit_error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class ValidationError(CalibkitError, ValueError):
    code = "validation_error"


class EmptyInput(ValidationError):
    code = "empty_input"


class NotNormalized(ValidationError):
    code = "not_normalized"


class LabelOutOfRange(ValidationError):
    code = "label_out_of_range"


class NonFiniteScore(ValidationError):
    code = "non_finite_score"


class TooManyBins(ValidationError):
    code = "too_many_bins"


class NonPositiveTemperature(ValidationError):
    code = "non_positive_temperature"


class EmptyFitSet(ValidationError):
    code = "empty_fit_set"


class DegenerateSplit(ValidationError):
    code = "degenerate_split"


class EmptySubset(ValidationError):
    code = "empty_subset"


class LabelNotInSubset(ValidationError):
    code = "label_not_in_subset"


class BinTooSmall(ValidationError):
    code = "bin_too_small"


class UndefinedDelta(ValidationError):
    code = "undefined_delta"


class Underdetermined(ValidationError):
    code = "underdetermined"


class NonPositiveCoordinate(ValidationError):
    code = "non_positive_coordinate"


class InvalidSupport(ValidationError):
    code = "invalid_support"


class ParseError(CalibkitError):
    code = "parse_error"

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line

    def to_dict(self):
        d = super().to_dict()
        d["line"] = self.line
        return d


class HeaderMismatch(ParseError):
    code = "header_mismatch"


class ConfigError(CalibkitError):
    code = "config_error"


class IoError(CalibkitError, OSError):
    code = "io_error"

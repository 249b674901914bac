"""Exception hierarchy. CLI exit codes hang off these classes."""


class RiskModelError(Exception):
    """Base class for every error raised by the package."""


class CohortError(RiskModelError):
    """Problem with an input cohort file."""


class SchemaError(CohortError):
    pass


class ParseError(CohortError):
    pass


class LabelError(CohortError):
    pass


class FitError(RiskModelError):
    pass


class ConfigError(RiskModelError):
    pass


class DimensionError(RiskModelError):
    pass


class TrainingError(RiskModelError):
    pass


class AnalysisError(RiskModelError):
    """An analysis precondition does not hold."""


class UndefinedMetricError(AnalysisError):
    pass


class BootstrapError(AnalysisError):
    pass


class DegenerateVarianceError(AnalysisError):
    pass


class StratificationError(AnalysisError):
    pass


class LeakageError(RiskModelError):
    pass

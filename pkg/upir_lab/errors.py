"""Exception hierarchy shared by the library, the CLI and the agents."""


class UpirLabError(Exception):
    """Base class for every error raised deliberately by upir_lab."""


class StructureError(UpirLabError, ValueError):
    """An incidence structure violates its well-formedness rules."""


class CfgFormatError(UpirLabError, ValueError):
    """Text handed to the ``cfg`` parser is not a valid file."""


class ConfigurationError(UpirLabError, ValueError):
    """A structure failed the configuration axioms.

    The full :class:`~upir_lab.incidence.ValidationReport` is kept on
    ``report`` so callers can show every finding, not only the first.
    """

    def __init__(self, report):
        self.report = report
        findings = "; ".join(report.violations) or "unknown violation"
        super().__init__(f"not a combinatorial configuration: {findings}")


class ParameterError(UpirLabError, ValueError):
    """A constructor or simulation parameter is out of range."""


class NotPrimeError(ParameterError):
    pass


class ResourceLimitError(ParameterError):
    pass


class DivisibilityError(ParameterError):
    pass


class PartitionError(UpirLabError, ValueError):
    """A point partition does not have the required shape."""


class AnonymityLevelError(UpirLabError, ValueError):
    pass


class NoDataError(UpirLabError, LookupError):
    pass


class UnknownQueryError(UpirLabError, LookupError):
    pass


class TraceFormatError(UpirLabError, ValueError):
    """A serialized simulation trace cannot be decoded."""

"""Exception hierarchy shared across the package."""


class QobsError(Exception):
    """Base class for all errors raised by qobs."""


class DimensionError(QobsError, ValueError):
    """Matrix shapes or parity conventions are inconsistent."""


class DomainError(QobsError, ValueError):
    """A scalar argument lies outside its admissible range."""


class PreconditionError(QobsError):
    """An operation was called on inputs that violate its stated precondition."""


class UnsupportedError(QobsError):
    """The requested computation is not available for this structure."""


class SynthesisError(QobsError):
    """Filter synthesis cannot proceed (e.g. singular D D^T)."""


class InfeasibleAugmentation(QobsError):
    """No vacuum-noise coupling repairs the estimator's realizability defect."""


class ScenarioError(QobsError, ValueError):
    """A scenario document failed to parse or validate.

    Attributes:
        field: dotted path of the offending field, when known.
        line: 1-based line number in the source document, when known.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)

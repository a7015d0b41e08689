"""Exception hierarchy.

Every concrete error class maps to exactly one CLI exit code:
``UsageError`` to 1, ``ValidationError`` subclasses to 2, and
``NumericalError`` subclasses to 3.
"""

from __future__ import annotations


class SaeBenchError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(SaeBenchError):
    """Malformed command line (exit code 1)."""


class ValidationError(SaeBenchError):
    """Invalid input data or configuration (exit code 2)."""


class NumericalError(SaeBenchError):
    """A numerical procedure failed (exit code 3)."""


class EmptyDataset(ValidationError):
    def __init__(self) -> None:
        super().__init__("dataset contains no records")


class InconsistentCovariateLength(ValidationError):
    def __init__(self, area_id: str, got: int, expected: int) -> None:
        self.area_id = area_id
        super().__init__(
            f"area {area_id!r} has {got} covariates, expected {expected}"
        )


class NonPositiveSamplingVariance(ValidationError):
    def __init__(self, area_id: str) -> None:
        self.area_id = area_id
        super().__init__(f"area {area_id!r} has sampling variance <= 0")


class NegativeWeight(ValidationError):
    def __init__(self, area_id: str) -> None:
        self.area_id = area_id
        super().__init__(f"area {area_id!r} has negative weight")


class NonFiniteValue(ValidationError):
    def __init__(self, area_id: str, field: str) -> None:
        self.area_id = area_id
        self.field = field
        super().__init__(f"area {area_id!r} has non-finite {field}")


class RankDeficientDesign(ValidationError):
    def __init__(self, rank: int, p: int) -> None:
        self.rank = rank
        super().__init__(f"design matrix has numerical rank {rank} < {p} columns")


class TooFewAreas(ValidationError):
    def __init__(self, m: int, p: int) -> None:
        super().__init__(f"need more areas than covariates: m={m} <= p={p}")


class AllWeightsZero(ValidationError):
    def __init__(self) -> None:
        super().__init__("all benchmark weights are zero; nothing to normalize")


class DuplicateArea(ValidationError):
    def __init__(self, area_id: str) -> None:
        self.area_id = area_id
        super().__init__(f"duplicate area_id {area_id!r}")


class MissingColumn(ValidationError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"required column {name!r} not found in header")


class UnknownColumn(ValidationError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"unrecognized column {name!r} in header")


class NonNumericCell(ValidationError):
    def __init__(self, row: int, column: str) -> None:
        self.row = row
        self.column = column
        super().__init__(f"non-numeric value at data row {row}, column {column!r}")


class EmptyReport(ValidationError):
    def __init__(self) -> None:
        super().__init__("refusing to write a report with no rows")


class ConfigError(ValidationError):
    """Malformed simulation configuration document."""


class SingularNormalEquations(NumericalError):
    def __init__(self, detail: str = "") -> None:
        msg = "weighted normal equations are numerically singular"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class BootstrapUnstable(NumericalError):
    def __init__(self, aborted: int, total: int) -> None:
        self.aborted = aborted
        super().__init__(
            f"{aborted} of {total} bootstrap replicates aborted (> 1% tolerated)"
        )


class SimulationUnstable(NumericalError):
    def __init__(self, aborted: int, total: int) -> None:
        self.aborted = aborted
        super().__init__(
            f"{aborted} of {total} simulation replicates aborted (> 1% tolerated)"
        )

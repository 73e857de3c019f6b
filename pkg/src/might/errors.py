"""Exception types shared across the package.

Every error raised on a per-node estimation path carries an optional
``node`` attribute (0-based column index) attached by the driver.
"""


class MightError(Exception):
    """Base class for all package errors."""

    node = None


class DimensionMismatch(MightError):
    """Datasets disagree on the number of covariates, or shapes are unusable."""


class TooFewObservations(MightError):
    """A dataset has fewer than two rows."""


class DegenerateCovariate(MightError):
    """A covariate has (numerically) zero scale in some dataset."""

    def __init__(self, dataset, column, message=None):
        self.dataset = dataset
        self.column = column
        super().__init__(
            message
            or f"covariate {column} in dataset {dataset} has zero scale"
        )


class ExactFit(MightError):
    """A node regression fit a dataset essentially exactly; the residual-based
    diagonal estimate would blow up."""

    def __init__(self, dataset, message=None):
        self.dataset = dataset
        super().__init__(
            message or f"residual in dataset {dataset} is numerically zero"
        )


class NonFinite(MightError):
    """A non-finite value appeared where finite numbers are required."""


class IterationCapExceeded(MightError):
    """The solver exceeded its total iteration budget."""


class SingularSubmatrix(MightError):
    """A moment submatrix is numerically singular (rcond below 1e-10)."""


class SupportTooLarge(MightError):
    """A selected support is larger than the sample size of a dataset."""


class NonRepairableMatrix(MightError):
    """A matrix could not be repaired to positive definiteness."""


class EmptyClassSplit(MightError):
    """A stratified split left a class with no train or no test rows."""


class InvalidSpec(MightError):
    """An experiment or solver configuration violates its declared ranges."""

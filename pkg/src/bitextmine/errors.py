"""Exception types shared across the engine.

ValidationError and its subclasses mark bad inputs or contract violations
(CLI exit code 2); everything else is a runtime failure (exit code 1).
"""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class FormatError(ValidationError):
    """On-disk data does not match its declared format."""


class ZeroNormError(ValidationError):
    """A vector or matrix row has zero L2 norm where a direction is required."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite parameter."""

    def __init__(self, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite parameter detected at epoch {epoch}, batch {batch}")


class SweepCellError(RuntimeError):
    """One sweep cell failed; carries the cell coordinates."""

    def __init__(self, fold: int, fraction: float, hidden_size: int, cause: BaseException):
        self.fold = fold
        self.fraction = fraction
        self.hidden_size = hidden_size
        super().__init__(
            f"sweep cell failed (fold={fold}, fraction={fraction}, h={hidden_size}): {cause}"
        )

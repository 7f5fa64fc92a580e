"""Exception types shared across the package.

The CLI maps these onto process exit codes; library code raises them
directly.
"""


class ConfigurationError(ValueError):
    """Invalid configuration: bad dimensions, fractions, seeds, or files."""


class ShapeError(ValueError):
    """Array or network shape mismatch between operands."""


class StateError(RuntimeError):
    """Operation invoked before a required prior step (e.g. fitness missing)."""


class ParseError(ValueError):
    """Malformed input file; message includes the offending row where known."""


class CheckpointError(ValueError):
    """Checkpoint file is corrupt, truncated, or not a checkpoint at all."""


class TrainingDivergenceError(RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")


class DataHygieneError(RuntimeError):
    """Validation and test data overlap; model selection would leak."""


class TaskMismatchError(RuntimeError):
    """Command applied to a task it cannot handle (e.g. boundary on non-2D)."""

"""Exception types shared across the package."""


class PligraphError(Exception):
    """Base class for all package errors."""


class MoleculeParseError(PligraphError, ValueError):
    """A structure file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyStructureError(PligraphError, ValueError):
    """Parsing or filtering left no usable atoms."""


class EmptyPocketError(PligraphError, ValueError):
    """No protein atom lies within the pocket cutoff of the ligand."""

    def __init__(self, sample_id, cutoff):
        self.sample_id = sample_id
        self.cutoff = cutoff
        super().__init__(f"empty pocket for sample {sample_id!r} at cutoff {cutoff} A")


class DataError(PligraphError, ValueError):
    """Invalid values in otherwise well-formed input (labels, geometry, tables)."""


class DatasetError(PligraphError, ValueError):
    """Dataset file violates the JSON-Lines record schema."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ShapeError(PligraphError, ValueError):
    """Tensor operands have incompatible shapes."""


class NumericError(PligraphError, ArithmeticError):
    """A numeric operation produced a non-finite value or an invalid domain."""


class CheckpointError(PligraphError, ValueError):
    """Checkpoint files are inconsistent, truncated, or version-mismatched."""

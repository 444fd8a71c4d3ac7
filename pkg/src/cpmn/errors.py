"""Exception hierarchy shared across the package."""


class CpmnError(Exception):
    """Base class for all library errors."""


class ShapeError(CpmnError):
    """Array shapes are inconsistent with the operation's contract."""


class ValidationError(CpmnError):
    """Input values violate a documented precondition."""


class FormatError(CpmnError):
    """A file does not carry the expected magic/version."""


class CorruptFileError(FormatError):
    """A file's payload is truncated or internally inconsistent."""


class CheckpointError(FormatError):
    """A parameter checkpoint cannot be read or does not match the model."""


class NumericalError(CpmnError):
    """A non-finite loss or gradient was produced; aborting is safer than continuing."""


class AssemblyError(CpmnError):
    """Per-window results do not cover the planned windows."""

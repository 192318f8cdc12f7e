"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: usage/validation problems exit 2,
anything that blew up at runtime exits 1.
"""


class InvalidArgumentError(ValueError):
    """A caller-supplied value violates a documented precondition."""


class ShapeError(InvalidArgumentError):
    """Tensor shape does not match the documented contract."""

    def __init__(self, what, expected, actual):
        super().__init__(f"{what}: expected shape {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class CorpusIOError(OSError):
    """A corpus record or manifest is missing or unreadable."""


class ConfigurationError(RuntimeError):
    """The runtime environment or config cannot support the request."""


class EmptyMaskError(ValueError):
    """A stroke statistic was requested over a mask with no foreground."""


class TrainingDivergenceError(RuntimeError):
    """A loss term became non-finite during training."""

    def __init__(self, part, value):
        super().__init__(f"loss term {part!r} is non-finite ({value})")
        self.part = part

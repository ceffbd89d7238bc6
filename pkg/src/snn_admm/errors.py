"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Malformed arguments: wrong shapes, non-finite values, out-of-range entries."""


class NumericalFailure(ArithmeticError):
    """A linear system that should be solvable turned out singular or indefinite."""


class DivergenceError(NumericalFailure):
    """The Lagrangian (or the state) became non-finite during training."""


class IncompleteRoundError(RuntimeError):
    """A federated round was asked to reduce without stats from every shard."""


class FormatError(ValueError):
    """Malformed file or message. ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(ValueError):
    """Bad run configuration (unknown key, violated invariant)."""

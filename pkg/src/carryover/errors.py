"""Exception types raised across the package."""


class CarryoverError(Exception):
    """Base class for every error raised by this package."""


# dialogue model
class EmptyDialogue(CarryoverError, ValueError):
    pass


class AlternationViolation(CarryoverError, ValueError):
    pass


class LastTurnNotUser(CarryoverError, ValueError):
    pass


class DistanceOutOfRange(CarryoverError, IndexError):
    pass


class SpanOutOfRange(CarryoverError, IndexError):
    pass


class InvariantViolation(CarryoverError, ValueError):
    def __init__(self, which: str, line: int | None = None):
        self.which = which
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{which}")


# tensor kernel
class ShapeMismatch(CarryoverError, ValueError):
    pass


class DomainError(CarryoverError, ValueError):
    pass


class InvalidRate(CarryoverError, ValueError):
    pass


class NonScalarLoss(CarryoverError, ValueError):
    pass


# embeddings / encoders
class InconsistentDim(CarryoverError, ValueError):
    pass


class EmptyFile(CarryoverError, ValueError):
    pass


class UnparsableLine(CarryoverError, ValueError):
    def __init__(self, line: int, msg: str = ""):
        self.line = line
        super().__init__(f"line {line}: {msg}" if msg else f"line {line}")


class EmptyTokenList(CarryoverError, ValueError):
    pass


class EmptyKey(CarryoverError, ValueError):
    pass


class EmptyIntent(CarryoverError, ValueError):
    pass


class NegativeDistance(CarryoverError, ValueError):
    pass


# candidate generation
class ZeroVector(CarryoverError, ValueError):
    pass


class EmptySchema(CarryoverError, ValueError):
    pass


# training
class EmptyDataset(CarryoverError, ValueError):
    pass


class NonFiniteLoss(CarryoverError, FloatingPointError):
    def __init__(self, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")


# io
class ParseError(CarryoverError, ValueError):
    def __init__(self, line: int, msg: str):
        self.line = line
        super().__init__(f"line {line}: {msg}")


class MissingScore(CarryoverError, ValueError):
    pass


class VersionMismatch(CarryoverError, ValueError):
    pass


class CorruptCheckpoint(CarryoverError, ValueError):
    pass

"""Exception types raised by the pose toolkit."""


class PoseError(Exception):
    """Base class for all domain errors."""


class InvalidDepth(PoseError, ValueError):
    pass


class DegenerateTranslation(PoseError, ValueError):
    pass


class DegenerateFrame(PoseError, ValueError):
    pass


class NumericalFailure(PoseError, ArithmeticError):
    pass


class InsufficientData(PoseError, ValueError):
    pass


class DegenerateConfiguration(PoseError, ValueError):
    pass


class CheiralityFailure(PoseError):
    pass


class DegenerateRays(PoseError, ValueError):
    pass


class NoModelFound(PoseError):
    pass


class InvalidNormal(PoseError, ValueError):
    pass


class GenerationFailure(PoseError, RuntimeError):
    pass


class OutOfBounds(PoseError, IndexError):
    pass


class ParseError(PoseError, ValueError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SchemaError(PoseError, ValueError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line

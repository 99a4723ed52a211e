"""Exception types raised across the package."""


class DVPError(Exception):
    """Base class for all package errors."""


# topology
class DisconnectedGraph(DVPError, ValueError):
    pass


class SelfLoop(DVPError, ValueError):
    pass


class UnknownNode(DVPError, KeyError):
    pass


class IterOutOfRange(DVPError, IndexError):
    pass


class InfeasibleDegree(DVPError, ValueError):
    pass


# dataset
class ParseError(DVPError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(DVPError, ValueError):
    pass


class EmptyInput(DVPError, ValueError):
    pass


class TooFewSamples(DVPError, ValueError):
    pass


# objective / solvers
class DimensionMismatch(DVPError, ValueError):
    pass


class EmptyDataset(DVPError, ValueError):
    pass


class SolverDidNotConverge(DVPError, RuntimeError):
    def __init__(self, message: str, grad_norm: float, iterations: int):
        self.grad_norm = grad_norm
        self.iterations = iterations
        super().__init__(message)


# privacy
class InvalidAlpha(DVPError, ValueError):
    pass


class InvalidZeta(DVPError, ValueError):
    pass


class NotNeighbors(DVPError, ValueError):
    pass


# tuning
class DegenerateFit(DVPError, ValueError):
    pass


class AlphaOutOfDomain(DVPError, ValueError):
    pass


class InfeasibleConstraint(DVPError, ValueError):
    pass


# metrics
class MissingClass(DVPError, ValueError):
    pass


class MissingNode(DVPError, KeyError):
    pass


# harness
class ConfigError(DVPError, ValueError):
    pass

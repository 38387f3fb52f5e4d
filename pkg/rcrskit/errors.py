"""
Exception hierarchy for rcrskit.

Every error raised by the toolchain derives from RcrsError, itself a ValueError, so callers
that only care about bad input can keep catching ValueError.
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

from typing import Dict, Optional


class RcrsError(ValueError):
    pass


# Symbolic core
class SortMismatch(RcrsError):
    pass


class ResourceLimit(RcrsError):
    pass


class UnboundVariable(RcrsError):
    pass


class QuantifiedInput(RcrsError):
    pass


class FormulaSyntaxError(RcrsError):
    pass


# Components
class FreeVariableEscape(RcrsError):
    pass


class ArityMismatch(RcrsError):
    pass


class AlgebraicLoop(RcrsError):
    pass


class NonFunctionalFeedback(RcrsError):
    pass


class SignatureMismatch(RcrsError):
    pass


# Blocks
class UnknownBlockType(RcrsError):
    pass


class MissingParameter(RcrsError):
    pass


# Diagrams
class SchemaError(RcrsError):
    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"


class ValidationError(RcrsError):
    pass


# Translator
class UnknownVariable(RcrsError):
    pass


class DuplicationRequested(RcrsError):
    pass


# Simulator
class NotFunctional(RcrsError):
    pass


class StateMismatch(RcrsError):
    pass


class TraceError(RcrsError):
    pass


class PreconditionViolation(RcrsError):
    """A violated precondition at a simulation step.  Simulations record it in their status."""

    def __init__(self, message: str, step: int, env: Optional[Dict[str, float]] = None):
        super().__init__(message)
        self.step = step
        self.env = dict(env or {})

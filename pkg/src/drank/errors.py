"""
Exception hierarchy for drank

Every error raised by the library derives from DrankError. Errors caused by
bad argument values also derive from ValueError.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .trainer import TrainTrace


class DrankError(Exception):
    """Base class for all drank errors"""


class EmptyNegativesError(DrankError, ValueError):
    """An image carries no negative scores, so the DR loss is undefined"""


class OutOfRangeError(DrankError, ValueError):
    """A score lies outside the open interval (0, 1)"""


class NonFiniteError(DrankError, ValueError):
    """A score or surrogate input is NaN or infinite"""


class BadBaseError(DrankError, ValueError):
    """Logarithm base for lambda tuning is not greater than 1"""


class EmptyInputError(DrankError, ValueError):
    """An operation received an empty vector"""


class BadPriorMaskError(DrankError, ValueError):
    """A mask prior selects nothing or indexes outside the score vector"""


class BadLambdaError(DrankError, ValueError):
    """A tilting temperature is not strictly positive"""


class NoPositivesError(DrankError, ValueError):
    """The loss needs at least one positive score"""


class StepOutOfRangeError(DrankError, ValueError):
    """A finite-difference perturbation leaves the open interval (0, 1)"""


class BadAlphaError(DrankError, ValueError):
    """Learning-rate scaling would produce a non-integer batch size"""


class BadSpecError(DrankError, ValueError):
    """A generator or histogram specification is invalid"""


class BadConfigError(DrankError, ValueError):
    """An experiment configuration cannot be resolved"""


class DivergenceError(DrankError):
    """Training produced a non-finite loss"""

    def __init__(self, message: str, trace: TrainTrace) -> None:
        super().__init__(message)
        self.trace = trace

"""Solution families and numerical verification for the modified entropy equation."""

__version__ = "0.1.0"

from .core import DimensionError, DomainError, LogFn, MultFn, PosVec
from .solutions import HFn, PsiFn, TriSolution, f_eval, from_descriptor
from .verifier import ResidualReport, SampleSpec, Witness

__all__ = [
    "DimensionError",
    "DomainError",
    "HFn",
    "LogFn",
    "MultFn",
    "PosVec",
    "PsiFn",
    "ResidualReport",
    "SampleSpec",
    "TriSolution",
    "Witness",
    "f_eval",
    "from_descriptor",
]

"""Exception and warning types raised by :mod:`sodbt`."""

import numpy as np


class SODBTError(Exception):
    """Base class for all package errors."""


class SingularPencil(SODBTError, np.linalg.LinAlgError):
    """The shifted matrix ``s^2 M + s D + K`` (or a time-stepping matrix) is
    numerically singular.

    ``node`` holds the offending complex frequency and ``index`` its position
    in a batch, when known.
    """

    def __init__(self, msg, node=None, index=None):
        super().__init__(msg)
        self.node = node
        self.index = index


class NegativeCoefficient(SODBTError, ValueError):
    pass


class IndexOutOfRange(SODBTError, IndexError):
    pass


class ParseError(SODBTError, ValueError):
    """Malformed model or sample file; message carries line/field info."""

    def __init__(self, msg, line=None, field=None):
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)
        self.line = line
        self.field = field


class DimensionMismatch(SODBTError, ValueError):
    pass


class InvariantViolation(SODBTError, ValueError):
    pass


class BadInterval(SODBTError, ValueError):
    pass


class NotIncreasing(SODBTError, ValueError):
    pass


class MissingDamping(SODBTError, ValueError):
    pass


class DisjointnessViolation(SODBTError, ValueError):
    def __init__(self, msg, pairs=()):
        super().__init__(msg)
        self.pairs = list(pairs)


class UnstableSystem(SODBTError, ValueError):
    pass


class IndefiniteGramian(SODBTError, np.linalg.LinAlgError):
    pass


class RankDeficient(SODBTError, ValueError):
    pass


class PremiseUnmet(SODBTError):
    """Premise of the singular-value perturbation bound does not hold.

    Only used as a status marker; :func:`sodbt.gramians.sv_perturbation_bound`
    reports it instead of raising.
    """


class DegenerateDenominator(SODBTError, ZeroDivisionError):
    def __init__(self, msg, k=None, j=None):
        super().__init__(msg)
        self.k = k
        self.j = j


class SingularBlock(SODBTError, np.linalg.LinAlgError):
    pass


class SpectraOverlap(SODBTError, np.linalg.LinAlgError):
    pass


class Breakdown(SODBTError, RuntimeError):
    """Extended Krylov recursion produced no new directions.

    ``dim`` is the dimension reached before the breakdown.
    """

    def __init__(self, msg, dim=None):
        super().__init__(msg)
        self.dim = dim


class DegenerateTruncation(UserWarning):
    """sigma_r and sigma_{r+1} coincide to working precision."""

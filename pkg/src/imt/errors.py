"""Exception hierarchy shared by every module of the package."""


class ImtError(Exception):
    """Base class for all errors raised by :mod:`imt`."""


class PrecisionExhausted(ImtError):
    """The requested answer is not determined at the working p-adic precision."""


class TooLarge(ImtError):
    """Input exceeds the configured desk-scale bounds."""


class EigenSplitFailed(ImtError):
    """A Hecke eigensystem could not be isolated with multiplicity one."""


class ZeroReduction(ImtError):
    """Every test value of a reduced modular symbol vanished."""


class NonIntegral(ImtError):
    """A group-ring element that should be integral carries a denominator."""


class HypothesisViolated(ImtError):
    """A hypothesis required by a closed-form statement does not hold."""


class TruncationTooSmall(ImtError):
    """A power-series truncation degree is too small for the requested level."""


class NotInPsiZero(ImtError):
    """A power series handed to the Mellin inverse is not killed by psi."""


class SingularSystem(ImtError):
    """A linear system over the group ring is not uniquely solvable."""


class InsufficientData(ImtError):
    """Too few computed levels to extract a stable pattern."""


class OutOfRange(ImtError):
    """Input lies outside the range where a formula is valid."""


class NotFound(ImtError):
    """A requested form is neither in the fixture pack nor reachable online."""


class SchemaMismatch(ImtError):
    """A fetched or cached record does not have the expected shape."""

"""Exception hierarchy.

Every domain failure raises a named subclass of :class:`QubofolioError` so
the CLI can print ``<ErrorName>: <message>`` and map it to an exit code.
"""


class QubofolioError(Exception):
    """Base class for all domain errors raised by this package."""


# market_data ---------------------------------------------------------------

class MissingMarket(QubofolioError):
    """The configured market ticker is absent from the input file."""


class ShortUniverse(QubofolioError):
    """Fewer than two assets remain after loading and alignment."""


class ShortHistory(QubofolioError):
    """A price series has fewer than two usable (aligned) dates."""


class NonPositivePrice(QubofolioError):
    """A close price is zero or negative."""


class DuplicateRow(QubofolioError):
    """The same (ticker, date) pair appears twice in the input."""


class DegenerateHistory(QubofolioError):
    """Too few return observations to form a sample covariance."""


class ZeroMarketVariance(QubofolioError):
    """Market variance is zero; beta is undefined."""


# scoring -------------------------------------------------------------------

class EmptyPortfolio(QubofolioError):
    """Scoring requested for a mask with no selected assets."""


class ZeroVariance(QubofolioError):
    """Portfolio standard deviation is zero; the ratio is undefined."""


# qubo ----------------------------------------------------------------------

class BadSize(QubofolioError):
    """Target portfolio size outside the representable range."""


class DegenerateAnchor(QubofolioError):
    """Shift anchors coincide (k == n); the affine system is singular."""


class ZeroMatrix(QubofolioError):
    """Cannot scale an all-zero coefficient matrix."""


class RangeViolation(QubofolioError):
    """Ising coefficients fall outside the allowed hardware ranges."""

    def __init__(self, message, linear_indices=(), coupling_indices=()):
        super().__init__(message)
        self.linear_indices = tuple(linear_indices)
        self.coupling_indices = tuple(coupling_indices)


class IoError(QubofolioError):
    """Reading or writing an artifact file failed."""


# solvers -------------------------------------------------------------------

class TooLarge(QubofolioError):
    """Exhaustive enumeration was requested beyond the configured limits."""


class EmptySeedPopulation(QubofolioError):
    """A seed population was supplied but contains no members."""


# cli / config --------------------------------------------------------------

class ConfigError(QubofolioError):
    """Unknown or malformed configuration key or value."""

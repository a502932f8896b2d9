"""Exception types shared across the package."""


class MomentSwapsError(Exception):
    """Base class for all package errors."""


class QuoteDataError(MomentSwapsError):
    """Malformed quote input (bad row, duplicate quote, empty file)."""


class ForwardUnavailableError(MomentSwapsError):
    """No strike quotes both a put and a call, so parity cannot be applied."""


class CurveUnavailableError(MomentSwapsError):
    """Fewer than three usable OTM points survive for an expiry."""


class SurfaceFitError(MomentSwapsError):
    """Constrained smoothing failed; the message names the violated constraint."""


class InvalidGridError(MomentSwapsError):
    """A strike grid violates its no-arbitrage invariants."""


class UnsupportedOrderError(MomentSwapsError):
    """Power log contract order outside the supported range."""


class NonPositiveImpliedVarianceError(MomentSwapsError):
    """Standardisation requires strictly positive implied variance."""


class BracketingError(MomentSwapsError):
    """Target maturity falls outside the two traded maturities."""


class CollinearDesignError(MomentSwapsError):
    """Regression design matrix is numerically rank deficient."""


class ValidationError(MomentSwapsError):
    """Configuration or CLI input failed validation (exit code 2)."""


class StageError(MomentSwapsError):
    """A pipeline stage failed while running (exit code 3)."""

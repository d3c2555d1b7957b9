"""Exception types shared across the package."""


class JarvisError(Exception):
    """Base class for all library errors."""


class ValidationError(JarvisError):
    """A value violates a domain invariant. ``field`` names the offender."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(message)


class EncoderUnavailableError(JarvisError):
    """A remote encoder endpoint failed after all retries."""


class MissingImageError(JarvisError):
    """An image reference could not be resolved."""


class AdjudicationUnavailableError(JarvisError):
    """The adjudication endpoint failed after all retries."""

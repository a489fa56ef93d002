"""Exception types shared across the package."""


class UrbanPulseError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(UrbanPulseError):
    """Invalid configuration value or missing required setting (CLI exit 2)."""


class FormatError(UrbanPulseError):
    """Fatal input-file format problem, e.g. a missing or wrong CSV header."""


class SingularSystemError(UrbanPulseError):
    """Normal equations are rank-deficient; ridge regularization is advised."""


class FactorizationError(UrbanPulseError):
    """Kernel system factorization failed even after a jitter retry."""


class DetectionError(UrbanPulseError):
    """Extreme-event detection has no usable observations."""


class AssemblyError(UrbanPulseError):
    """Feature builders disagree on the hour range being assembled."""

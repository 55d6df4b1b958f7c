"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class QOCTError(Exception):
    """Base class for all package errors."""


class ConfigError(QOCTError, ValueError):
    """Malformed configuration, sample/source file or interferogram file."""


class PhysicsError(QOCTError):
    """Physically impossible or numerically unsupported configuration."""


class BandError(PhysicsError, ValueError):
    """Wavelength outside the band an index model is valid for."""


class PhaseMatchingError(PhysicsError):
    """No (or no unique) phase-matching cut angle exists."""


class GridError(PhysicsError):
    """Frequency grid does not resolve or contain the spectrum."""


class DegenerateError(QOCTError):
    """The inverse problem has no unique answer for these inputs."""


class DegenerateInputError(DegenerateError, ValueError):
    """Both interferogram levels vanish, so the retardance is undefined."""


class DegenerateLandscapeError(DegenerateError):
    """Coincidence rate does not depend on the reference-arm angles."""


class IndeterminateAlphaError(DegenerateError):
    """The nulling conditions do not constrain the optical-axis angle."""

"""Exception hierarchy shared across the toolkit."""


class RfmsmError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(RfmsmError):
    """Bad user input: violated precondition, malformed config, impossible request."""


class ConfigError(ValidationError):
    """Malformed or inconsistent experiment configuration."""


class CanonicalFormatError(ValidationError):
    """Malformed canonical dataset / checkpoint / embedding file.

    ``code`` distinguishes failure modes so callers can branch without
    string-matching messages: ``bad_magic``, ``bad_header``, ``truncated_body``,
    ``label_mismatch``, ``trailing_data``, ``invalid_labels``.
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class TrainingDivergedError(RfmsmError):
    """Loss became non-finite during optimization."""

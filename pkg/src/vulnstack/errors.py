"""Exception types shared across the package."""

from __future__ import annotations


class VulnstackError(Exception):
    """Base class for all package-specific errors."""


class CorpusError(VulnstackError):
    """A corpus file or record violates the corpus contract."""


class SplitError(VulnstackError):
    """Ratios or class counts make a stratified split impossible."""


class ProbFormatError(VulnstackError):
    """An external probability file violates the wire format."""


class CoverageError(VulnstackError):
    """An external probability table is missing required sample ids."""


class DegenerateDataError(VulnstackError):
    """Training data cannot support a fit (for example a single class)."""


class CalibrationError(VulnstackError):
    """Probability calibration cannot run on the given class counts."""


class ConfigError(VulnstackError):
    """A run configuration is malformed or internally inconsistent."""


class PipelineError(VulnstackError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r}: {message}")
        self.stage = stage

"""
Exception hierarchy for facetweak.

The CLI maps these onto exit codes: configuration problems exit with 1,
data problems with 2 and numerical failures with 3.
"""


class FacetweakError(Exception):
    """Base class for all facetweak errors."""


class ShapeError(FacetweakError, ValueError):
    """Tensor shapes do not compose."""


class BackwardError(FacetweakError):
    """A backward pass was requested without a matching forward trace."""


class ConfigError(FacetweakError, ValueError):
    """Invalid configuration value or combination."""


class DataError(FacetweakError):
    """Unreadable, malformed or empty input data."""


class DegenerateGroundTruthError(DataError):
    """Ground-truth eye landmarks coincide (inter-ocular distance ~ 0)."""


class DegenerateConfigurationError(DataError):
    """Point configuration cannot determine a similarity transform."""


class ContainerFormatError(DataError):
    """Serialized artifact has a bad header, unknown version or is truncated."""


class MissingArtifactError(DataError):
    """An upstream pipeline artifact is missing."""

    def __init__(self, path, command: str):
        self.path = path
        self.command = command
        super().__init__(
            f"Required artifact not found: {path}. Run `facetweak {command}` first."
        )


class NumericalError(FacetweakError):
    """A numerical procedure failed."""


class DivergenceError(NumericalError):
    """Training loss became non-finite or exceeded the divergence guard."""

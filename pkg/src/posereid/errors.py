"""Exception types shared across the package."""


class SamplingError(RuntimeError):
    """No valid sample satisfies the requested constraints."""


class DegenerateGeometryError(ValueError):
    """Keypoint geometry is degenerate (collinear or coincident points)."""


class ConfigError(ValueError):
    """A run configuration is inconsistent or incomplete."""


class NumericalAbortError(RuntimeError):
    """Training hit a non-finite loss; carries the path of the diagnostic dump."""

    def __init__(self, message: str, dump_path=None):
        super().__init__(message)
        self.dump_path = dump_path

"""Exception types shared across the package."""


class MorphaeusError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(MorphaeusError):
    """Invalid user configuration (bad paths, malformed config, bad values).

    The CLI maps this to exit code 1.
    """


class TrainingDivergedError(MorphaeusError):
    """Raised when a training run produces a non-finite loss."""

    def __init__(self, epoch: int, components: dict[str, float]):
        self.epoch = epoch
        self.components = components
        parts = ", ".join(f"{k}={v!r}" for k, v in components.items())
        super().__init__(f"non-finite loss at epoch {epoch}: {parts}")


class ExtractorUnavailableError(MorphaeusError):
    """Pretrained feature-extractor weights could not be loaded."""

"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration (bad value, non-tiling spacing, unknown key)."""


class FarFieldError(ValueError):
    """A position violates the far-field guard distance."""


class DegenerateInputError(ValueError):
    """Input too small or too degenerate for the requested computation."""


class RankDeficiencyError(ValueError):
    """A matrix that must be inverted does not have full rank."""


class SingularCovarianceError(ValueError):
    """Covariance matrix is singular beyond the regularization tolerance."""


class DecompositionError(ValueError):
    """Covariance factorization lost essentially all variance to clipping."""


class ConvergenceError(RuntimeError):
    """Too many optimization runs failed to converge."""


class CsvFormatError(ValueError):
    """Malformed measurement CSV. Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class SpanError(ValueError):
    """Covariance curve does not span enough separation for the requested transform."""

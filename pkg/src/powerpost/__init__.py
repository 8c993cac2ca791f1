"""Tempered (power) posteriors: closed forms, alpha selection and asymptotics."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DataError,
    NumericalError,
    PowerPostError,
)
from .linmodel import Dataset, GaussianPosterior, ridge_posterior, vi_posterior  # noqa: E402
from .tuning import TuningResult, tune  # noqa: E402

__all__ = [
    "ConfigError",
    "DataError",
    "Dataset",
    "GaussianPosterior",
    "NumericalError",
    "PowerPostError",
    "TuningResult",
    "__version__",
    "ridge_posterior",
    "tune",
    "vi_posterior",
]

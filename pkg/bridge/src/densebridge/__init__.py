"""Model-to-interchange bridge for the density tracking engine."""

from .exporter import (
    ExtractorSpec,
    export_density,
    export_features,
    export_motion,
    run_export,
)
from .models import ModelError

__version__ = "0.1.0"

__all__ = [
    "ExtractorSpec",
    "ModelError",
    "export_density",
    "export_features",
    "export_motion",
    "run_export",
    "__version__",
]

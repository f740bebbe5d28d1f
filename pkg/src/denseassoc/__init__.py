"""Density-map crowd tracking: localization, motion/appearance fusion,
Hungarian association, trajectory metrics, and a synthetic scenario
generator for closed-loop verification."""

from .iomodel import (
    ConfigError,
    DensityMap,
    FeatureSet,
    FormatError,
    MotionField,
    PipelineConfig,
    Point,
    SceneBundle,
    Trajectory,
    ValidationError,
    read_bundle,
    validate_bundle,
    write_bundle,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DensityMap",
    "FeatureSet",
    "FormatError",
    "MotionField",
    "PipelineConfig",
    "Point",
    "SceneBundle",
    "Trajectory",
    "ValidationError",
    "read_bundle",
    "validate_bundle",
    "write_bundle",
    "__version__",
]

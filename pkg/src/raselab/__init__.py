"""raselab: simulator and analysis workbench for four-level rephased-ASE memory."""

__version__ = "0.1.0"

from .core import (
    DetectionConfig,
    ExperimentConfig,
    LevelScheme,
    LossBudget,
    TimeTrace,
    Transition,
    ValidationError,
    WindowSpec,
    default_level_scheme,
    load_trace,
    save_trace,
)

__all__ = [
    "DetectionConfig",
    "ExperimentConfig",
    "LevelScheme",
    "LossBudget",
    "TimeTrace",
    "Transition",
    "ValidationError",
    "WindowSpec",
    "default_level_scheme",
    "load_trace",
    "save_trace",
    "__version__",
]

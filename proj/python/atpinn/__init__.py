"""Python bindings for the atpinn C++ core."""

from ._atpinn import (
    ConfigError,
    Network,
    NumericalError,
    burgers_reference,
    load_checkpoint,
    lhs,
    preset_names,
    preset_text,
    problem_names,
    reference_grid,
    relative_l2,
    residual,
    resolve_config,
    run,
    uniform,
)

__all__ = [
    "ConfigError",
    "Network",
    "NumericalError",
    "burgers_reference",
    "load_checkpoint",
    "lhs",
    "preset_names",
    "preset_text",
    "problem_names",
    "reference_grid",
    "relative_l2",
    "residual",
    "resolve_config",
    "run",
    "uniform",
]

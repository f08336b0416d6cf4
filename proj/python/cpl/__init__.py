"""Python bindings for the conservation-projected PINN core."""

from ._cpl import (
    ConfigError,
    InputError,
    NumericalError,
    config_keys,
    problem_names,
    proj_combined,
    proj_linear,
    proj_quadratic,
    render_config,
    sobol,
    solve_affine,
    train,
    verify,
)

__all__ = [
    "ConfigError",
    "InputError",
    "NumericalError",
    "config_keys",
    "problem_names",
    "proj_combined",
    "proj_linear",
    "proj_quadratic",
    "render_config",
    "sobol",
    "solve_affine",
    "train",
    "verify",
]

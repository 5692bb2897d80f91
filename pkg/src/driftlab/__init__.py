"""Nonlocal drift-diffusion solver with a diagnostic suite for De Giorgi-type regularity estimates."""

__version__ = "0.1.0"

from .config import RunConfig, load_config, validate_config
from .grid import Grid, GridField
from .kernel import KernelSpec
from .nonlocal_op import apply_fractional_laplacian, apply_operator, build_plan
from .solver import heat_trajectory, simulate

__all__ = ["__version__", "RunConfig", "load_config", "validate_config", "Grid", "GridField", "KernelSpec",
           "apply_fractional_laplacian", "apply_operator", "build_plan", "heat_trajectory", "simulate"]

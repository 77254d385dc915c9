"""Desk-scale numerical lab for concavity of Renyi-type functionals along
Wasserstein geodesics on closed-form model spaces."""

__version__ = "0.1.0"

from . import (  # noqa: F401
    errors,
    functionals,
    gradient_flow,
    hamilton_jacobi,
    interpolation,
    spaces,
    transport,
)

"""Numerical laboratory for Hausdorff operators on quasi-Banach function spaces."""

__version__ = "0.1.0"

from .descriptors import Descriptor, parse_descriptor  # noqa: E402
from .grid import BoxGrid, Region, SampledFunction, lp_quasi_norm, sample  # noqa: E402
from .hausdorff import RadialProfile, Symbol, apply, dual_profile, reduce_to_profile  # noqa: E402
from .spaces import SpaceSpec, space_norm  # noqa: E402
from .witness import WitnessParams, growth_experiment, unboundedness_verdict  # noqa: E402

__all__ = [
    "__version__",
    "Descriptor",
    "parse_descriptor",
    "BoxGrid",
    "Region",
    "SampledFunction",
    "sample",
    "lp_quasi_norm",
    "Symbol",
    "RadialProfile",
    "reduce_to_profile",
    "dual_profile",
    "apply",
    "SpaceSpec",
    "space_norm",
    "WitnessParams",
    "growth_experiment",
    "unboundedness_verdict",
]

"""Numerical laboratory for curvature flows, pinching functionals and entropy monitors."""

__version__ = "0.1.0"

__all__ = [
    "curvature_algebra",
    "speed_functions",
    "support_flow",
    "entropy_gcf",
    "mesh_flow",
    "verification",
    "cli",
]

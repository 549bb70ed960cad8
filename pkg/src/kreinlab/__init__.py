"""Resolvents of singular perturbations of the 3D Laplacian via Krein's formula.

Submodules
----------
krein_core
    Finite-dimensional Krein formula and its brute-force oracle.
kernels
    Free Green function, point Q-matrix, radial sources, lattice helpers.
points
    Point interactions: resolvent, bound states, boundary conditions.
segment
    Perturbation supported on a segment with a Sturm-Liouville coupling.
estimators
    scikit-learn style wrappers (imported lazily).
cli
    Command-line front end.
"""
__version__ = "0.1.0"

from .errors import ConfigError, KreinError, ModelError  # noqa: E402
from .kernels import Energy, free_green, point_q_matrix, sqrt_upper  # noqa: E402
from .krein_core import FiniteModel, direct_perturbed, krein_rank_n  # noqa: E402
from .points import CONVENTION_NOTE, bound_states, make_point_model  # noqa: E402
from .segment import make_segment_model, solve_segment  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "KreinError",
    "ModelError",
    "Energy",
    "free_green",
    "point_q_matrix",
    "sqrt_upper",
    "FiniteModel",
    "direct_perturbed",
    "krein_rank_n",
    "CONVENTION_NOTE",
    "bound_states",
    "make_point_model",
    "make_segment_model",
    "solve_segment",
    "PointInteractionResolvent",
    "SegmentResolvent",
]


def __getattr__(name):
    # scikit-learn is only imported when an estimator is asked for.
    if name in ("PointInteractionResolvent", "SegmentResolvent"):
        from . import estimators

        return getattr(estimators, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")

"""Estimator-style wrappers around the point and segment resolvents.

Both classes follow the scikit-learn conventions: constructor arguments are
stored verbatim, ``fit`` builds and solves the model and sets trailing
underscore attributes, ``predict`` evaluates ``R_W(z) h`` / ``R_L(z) h`` at
query points. ``predict`` returns complex values.
"""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .kernels import Energy, GaussianSource
from .points import apply_resolvent, bound_states, make_point_model
from .segment import make_segment_model, negative_spectrum, solve_segment

__all__ = ["PointInteractionResolvent", "SegmentResolvent"]


def _energy(z):
    z = complex(z)
    if not np.isfinite(z):
        raise ValueError("z must be finite")
    return Energy.from_z(z)


def _source(center, width):
    return GaussianSource(center, width)


class PointInteractionResolvent(BaseEstimator):
    """Resolvent of the Laplacian with point interactions at the fitted centers.

    Parameters
    ----------
    coupling : float or array-like of shape (N, N)
        Hermitian coupling ``W``; a scalar means ``coupling * I``.
    z : complex
        Spectral parameter (off the spectrum).
    source_center : array-like of shape (3,)
    source_width : float
        Gaussian source ``h`` the resolvent is applied to.
    kappa_range : tuple of float
        Search window for :meth:`bound_states`.

    Attributes
    ----------
    model_ : PointModel
    n_centers_ : int
    """

    def __init__(self, coupling=1.0, z=-1.0, source_center=(0.0, 0.0, 1.0),
                 source_width=0.5, kappa_range=(1e-3, 20.0)):
        self.coupling = coupling
        self.z = z
        self.source_center = source_center
        self.source_width = source_width
        self.kappa_range = kappa_range

    def fit(self, X, y=None):
        """Take the rows of ``X`` (shape ``(N, 3)``) as interaction centers."""
        X = check_array(X, dtype=float)
        if X.shape[1] != 3:
            raise ValueError(f"centers must have 3 columns, got {X.shape[1]}")
        W = np.asarray(self.coupling, dtype=complex)
        if W.ndim == 0:
            W = W * np.eye(len(X))
        self.model_ = make_point_model(X, W)
        self.energy_ = _energy(self.z)
        self.source_ = _source(self.source_center, self.source_width)
        self.n_centers_ = len(X)
        return self

    def predict(self, X):
        """``(R_W(z) h)(x)`` for every row ``x`` of ``X``."""
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        return apply_resolvent(self.model_, self.energy_, self.source_, X).values

    def bound_states(self):
        """Bound states of the fitted model inside ``kappa_range``."""
        check_is_fitted(self, "model_")
        return bound_states(self.model_, self.kappa_range)


class SegmentResolvent(BaseEstimator):
    """Resolvent of the Laplacian perturbed on the segment ``[0, length]``.

    Parameters
    ----------
    length : float
    potential : float, list, dict or callable
        Real potential ``v`` of ``L = -d^2/dx^2 + v``; see
        :func:`~kreinlab.segment.make_potential`.
    n_nodes : int
    z : complex
    source_center, source_width
        Gaussian source ``h``.

    Attributes
    ----------
    model_ : SegmentModel
    solution_ : SegmentSolution
    """

    def __init__(self, length=1.0, potential=0.0, n_nodes=200, z=-1.0,
                 source_center=(0.5, 1.0, 0.0), source_width=0.3):
        self.length = length
        self.potential = potential
        self.n_nodes = n_nodes
        self.z = z
        self.source_center = source_center
        self.source_width = source_width

    def fit(self, X=None, y=None):
        """Discretise and solve the segment system; ``X`` is ignored."""
        self.model_ = make_segment_model(self.length, self.potential, self.n_nodes)
        self.solution_ = solve_segment(
            self.model_, _energy(self.z), _source(self.source_center, self.source_width)
        )
        return self

    def predict(self, X):
        """``(R_L(z) h)(x)`` for every row ``x`` of ``X``."""
        check_is_fitted(self, "solution_")
        X = check_array(X, dtype=float)
        return self.solution_.field(X)

    def trace(self):
        """Boundary trace ``u_f = -u_hat / (4 pi)`` on the nodes."""
        check_is_fitted(self, "solution_")
        return self.solution_.trace()

    def negative_spectrum(self, kappa_range=(1e-3, 20.0)):
        check_is_fitted(self, "model_")
        return negative_spectrum(self.model_, kappa_range)

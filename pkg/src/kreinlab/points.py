r"""Point interactions (zero-range potentials) for the 3D Laplacian.

The perturbed resolvent is

.. math::

    R_W(z) = R(z) - \sum_{m,n} ([Q(z) + W]^{-1})_{mn} (\cdot, g_n(\bar z)) g_m(z),

with :math:`g_n(z; x) = g(z | |x - x_n|)` and ``Q`` from
:func:`~kreinlab.kernels.point_q_matrix`.

Sign convention. With ``Q(z) = i sqrt(z) / (4 pi)`` as above, a single
center with real coupling ``alpha`` carries a bound state exactly when
``alpha > 0``, at ``kappa = 4 pi alpha``, i.e. ``E = -16 pi^2 alpha^2``. Much of
the physics literature uses the opposite sign for the coupling.

Functions in the domain of the perturbed operator obey, at every center,

    lim d/drho (rho f) + 4 pi sum_n w_mn lim (rho_n f) = 0,

the factor ``4 pi`` coming from the ``1 / (4 pi rho)`` normalisation of ``g``.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.optimize import brentq

from .errors import (
    AtCenter,
    NonConvergentExtrapolation,
    NonHermitianW,
    QPlusWSingular,
    ResonantEnergy,
)
from .grid import GridFunction
from .kernels import (
    FOUR_PI,
    Energy,
    PointConfiguration,
    _as_energy,
    distances_to,
    free_green,
    point_q_matrix,
)

__all__ = [
    "CONVENTION_NOTE",
    "PointModel",
    "BoundState",
    "make_point_model",
    "perturbed_green",
    "bound_states",
    "eigenfunction",
    "eigenfunction_coeffs",
    "boundary_condition_residual",
    "center_limits",
    "apply_resolvent",
    "scan_crossings",
]

CONVENTION_NOTE = (
    "Q(z) = i*sqrt(z)/(4*pi) with Im sqrt(z) >= 0; a single center with coupling "
    "alpha > 0 binds at kappa = 4*pi*alpha (E = -16*pi^2*alpha^2), opposite to the "
    "common literature sign; boundary condition lim d/drho(rho f) + "
    "4*pi*sum_n w_mn lim(rho_n f) = 0."
)

DEFAULT_DIRECTION = np.ones(3) / np.sqrt(3.0)
AT_CENTER_TOL = 1e-12
COND_MAX = 1e12


@dataclass(frozen=True)
class PointModel:
    """Centers plus Hermitian coupling matrix ``W``."""

    cfg: PointConfiguration
    W: np.ndarray

    @property
    def N(self):
        return len(self.cfg)

    @property
    def centers(self):
        return self.cfg.centers


@dataclass(frozen=True)
class BoundState:
    energy: float
    kappa: float
    coeffs: np.ndarray


def make_point_model(centers, W):
    """Validate centers and coupling; a scalar ``W`` means ``W * I``.

    Raises
    ------
    CoincidentCenters
        If two centers are closer than 1e-12.
    NonHermitianW
        If ``W`` is not Hermitian to 1e-12 or has the wrong shape.
    """
    cfg = centers if isinstance(centers, PointConfiguration) else PointConfiguration(centers)
    W = np.asarray(W, dtype=complex)
    if W.ndim == 0:
        W = W * np.eye(len(cfg))
    if W.shape != (len(cfg), len(cfg)):
        raise NonHermitianW(f"W must be {len(cfg)}x{len(cfg)}, got {W.shape}")
    if np.max(np.abs(W - W.conj().T)) > 1e-12:
        raise NonHermitianW("W is not Hermitian")
    if np.all(W.imag == 0):
        W = W.real.astype(complex)
    W.setflags(write=False)
    return PointModel(cfg, W)


def _check_off_centers(model, pts):
    dist = distances_to(pts, model.centers)
    if np.any(dist < AT_CENTER_TOL):
        raise AtCenter("evaluation point coincides with a center")
    return dist


def _coupling_inverse(model, e):
    M = point_q_matrix(model.cfg, e) + model.W
    if np.linalg.cond(M) >= COND_MAX:
        if e.is_real:
            raise ResonantEnergy(f"Q(z) + W is singular at real z = {e.z}")
        raise QPlusWSingular(f"Q(z) + W is singular at z = {e.z}")
    return la.lu_factor(M)


def perturbed_green(model, e, x, y):
    """Kernel of ``R_W(z)``:

    ``g(z||x-y|) - sum_{mn} ([Q+W]^{-1})_{mn} g(z||x-x_m|) g(z||y-x_n|)``.

    ``x`` may be a single point or an ``(M, 3)`` array; ``y`` is one point.
    """
    e = _as_energy(e)
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).reshape(3)
    dx = _check_off_centers(model, xs)
    dy = _check_off_centers(model, y[None, :])[0]
    lu = _coupling_inverse(model, e)
    gy = free_green(e, dy)
    coef = la.lu_solve(lu, gy)
    out = free_green(e, np.linalg.norm(xs - y, axis=1)) - free_green(e, dx) @ coef
    return out[0] if np.ndim(x) == 1 else out


def scan_crossings(matrix_at, kappa_lo, kappa_hi, n_scan=400, xtol=1e-12):
    """Zero crossings of the eigenvalues of a Hermitian family ``matrix_at(kappa)``.

    The family must be monotonically decreasing in ``kappa`` (as
    ``Q(-kappa^2)`` is), so the number of negative eigenvalues can only grow.
    Each increase is bracketed on a uniform scan and the crossing eigenvalue
    (by sorted index) is refined with Brent's method.

    Returns
    -------
    list of (kappa, eigenvalue index)
    """
    if not kappa_lo < kappa_hi:
        return []
    grid = np.linspace(kappa_lo, kappa_hi, n_scan)

    def evals(k):
        return la.eigvalsh(matrix_at(k))

    counts = [int(np.sum(evals(k) < 0)) for k in grid]
    roots = []
    for i in range(len(grid) - 1):
        for j in range(counts[i], counts[i + 1]):
            k = brentq(lambda t: evals(t)[j], grid[i], grid[i + 1], xtol=xtol, rtol=1e-15)
            roots.append((k, j))
    return roots


def bound_states(model, kappa_range, n_scan=400):
    """Negative energies ``-kappa^2`` where ``Q(-kappa^2) + W`` is singular.

    Every eigenvalue of ``Q(-kappa^2) + W`` decreases with ``kappa``; each
    zero crossing in ``kappa_range`` is one bound state. Coefficients are the
    unit null vector, phase-fixed so the largest entry is real positive.
    """
    lo, hi = map(float, kappa_range)
    if lo <= 0:
        raise ValueError("kappa range must be positive")

    def mat(k):
        return point_q_matrix(model.cfg, Energy.from_kappa(k)) + model.W

    states = []
    for k, j in scan_crossings(mat, lo, hi, n_scan):
        _, vecs = la.eigh(mat(k))
        c = vecs[:, j].astype(complex)
        c *= np.exp(-1j * np.angle(c[np.argmax(np.abs(c))]))
        states.append(BoundState(-k * k, k, c / np.linalg.norm(c)))
    states.sort(key=lambda s: s.kappa)
    return states


def eigenfunction(model, state, x):
    """``psi(x) = sum_m c_m exp(-kappa |x - x_m|) / (4 pi |x - x_m|)``."""
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    dist = _check_off_centers(model, xs)
    out = (np.exp(-state.kappa * dist) / (FOUR_PI * dist)) @ state.coeffs
    return out[0] if np.ndim(x) == 1 else out


eigenfunction_coeffs = eigenfunction


def eigenfunction_norm(model, state):
    """``||psi||^2`` from the Gram matrix ``exp(-kappa |x_m - x_n|) / (8 pi kappa)``."""
    G = np.exp(-state.kappa * model.cfg.distances()) / (8 * np.pi * state.kappa)
    c = state.coeffs
    return float(np.real(c.conj() @ G @ c))


def _richardson(seq, ratio=2.0, order=1):
    """Richardson tableau for values ``seq[k]`` sampled at ``h0 / ratio^k``.

    Errors are assumed to expand in powers ``h^order, h^(order+1), ...``.
    Returns the final estimate and the difference between the last two
    diagonal entries.
    """
    T = [np.asarray(seq, dtype=complex)]
    p = order
    while len(T[-1]) > 1:
        prev = T[-1]
        f = ratio**p
        T.append((f * prev[1:] - prev[:-1]) / (f - 1.0))
        p += 1
    diag = [t[-1] for t in T]
    return diag[-1], abs(diag[-1] - diag[-2])


def center_limits(f, center, direction=DEFAULT_DIRECTION, rho0=1e-2, levels=7, tol=1e-4):
    """Limits of ``rho f`` and ``d/drho (rho f)`` at ``center`` along ``direction``.

    Uses ``rho_k = rho0 / 2^k``, ``k = 0 .. levels - 1``, with Richardson
    extrapolation. ``f`` maps an ``(M, 3)`` array of points to values.

    Returns
    -------
    value, slope : complex
        ``lim rho f`` and ``lim d/drho (rho f)``.

    Raises
    ------
    NonConvergentExtrapolation
        If the last two Richardson stages differ by more than ``tol``
        (relative to ``max(1, |estimate|)``).
    """
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    rho = rho0 / 2.0 ** np.arange(levels)
    pts = np.asarray(center, dtype=float) + rho[:, None] * u
    phi = rho * np.asarray(f(pts), dtype=complex)
    value, dv = _richardson(phi)
    # Forward quotients (phi(rho) - phi(rho/2)) / (rho/2) tend to the slope.
    slope, ds = _richardson((phi[:-1] - phi[1:]) / rho[1:])
    for est, diff in ((value, dv), (slope, ds)):
        if diff > tol * max(1.0, abs(est)):
            raise NonConvergentExtrapolation(
                f"Richardson stages disagree by {diff:.3e} at center {center}"
            )
    return value, slope


def boundary_condition_residual(model, f, m, direction=DEFAULT_DIRECTION, rho0=None):
    """``|lim d/drho(rho f) + 4 pi sum_n w_mn lim(rho_n f)|`` at center ``m``.

    Small for members of the perturbed operator's domain. ``rho0``
    defaults to ``1e-2 * d`` (``1e-2`` for a single center).
    """
    if rho0 is None:
        rho0 = 1e-2 * (model.cfg.d if np.isfinite(model.cfg.d) else 1.0)
    limits = [center_limits(f, c, direction, rho0) for c in model.centers]
    values = np.array([v for v, _ in limits])
    slope = limits[m][1]
    return float(abs(slope + FOUR_PI * model.W[m] @ values))


def apply_resolvent(model, e, source, eval_points):
    """``R_W(z) h`` at the evaluation points for a radial source ``h``.

    Uses ``(h, g_n(conj z)) = (R(z) h)(x_n)``, so only free-resolvent values
    of the source are needed.
    """
    e = _as_energy(e)
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    dist = _check_off_centers(model, pts)
    lu = _coupling_inverse(model, e)
    at_centers = source.resolvent(e, model.centers)
    coef = la.lu_solve(lu, at_centers)
    values = source.resolvent(e, pts) - free_green(e, dist) @ coef
    return GridFunction(pts, values, {"z": [e.z.real, e.z.imag], "operator": "R_W"})

r"""Singular perturbation of the 3D Laplacian supported on a segment.

The segment ``[0, l]`` sits on the ``x1`` axis. With

* ``G(z) u = int_0^l g(z | x, (s, 0, 0)) u(s) ds`` (segment -> R^3),
* ``Q(z)`` the integral operator on ``[0, l]`` with kernel
  ``(exp(i sqrt(z) |x - s|) - 1) / (4 pi |x - s|)``,
* ``L = -d^2/dx^2 + v(x)`` with Dirichlet conditions,

the perturbed resolvent is ``R_L(z) = R(z) - G(z) [Q(z) + L]^{-1} G(conj z)^*``.

Everything is discretised on a uniform midpoint grid: nodes
``(j - 1/2) h``, weights ``h = l / n``. ``Q`` is a Nyström matrix on these nodes
and ``L`` a three-point stencil with the Dirichlet ghost values
``u_0 = -u_1`` and ``u_{n+1} = -u_n``. Near the segment ``G(z) u`` is evaluated
from a cubic-spline interpolant of ``u`` with the ``1/d`` singularity
integrated in closed form.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.interpolate import CubicSpline

from . import quadrature
from .errors import (
    ConfigError,
    NonConvergentExtrapolation,
    RealEnergy,
    SingularLPlusQ,
    ZeroEigenvalue,
)
from .grid import GridFunction
from .kernels import FOUR_PI, Energy, _as_energy, _green_increment
from .points import scan_crossings

__all__ = [
    "SegmentModel",
    "SturmLiouvilleOp",
    "BoundaryTrace",
    "TraceReport",
    "SegmentSolution",
    "make_potential",
    "make_segment_model",
    "build_segment_q",
    "build_sturm_liouville",
    "gstar_g_matrix",
    "free_resolvent_on_segment",
    "solve_segment",
    "apply_r_l",
    "correction_matrix",
    "negative_spectrum",
    "log_boundary_trace",
    "simp1_residual",
    "boundary_trace",
]

COND_MAX = 1e12
LN2 = np.log(2.0)


def make_potential(spec):
    """Build a callable potential ``v(x)`` from a config value.

    Accepts a number (constant), a list of polynomial coefficients
    ``[c0, c1, ...]`` (``c0 + c1 x + ...``), a callable, or a mapping with one
    of the keys ``constant``, ``polynomial`` or ``table`` (``{"x": [...],
    "v": [...]}``, linearly interpolated).
    """
    if callable(spec):
        return spec
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        c = float(spec)
        return lambda x: np.full(np.shape(x), c)
    if isinstance(spec, (list, tuple)):
        coeffs = [float(c) for c in spec]
        return lambda x: np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), coeffs)
    if isinstance(spec, dict) and len(spec) == 1:
        (kind, val), = spec.items()
        if kind == "constant":
            return make_potential(float(val))
        if kind == "polynomial":
            return make_potential(list(val))
        if kind == "table":
            try:
                xs = np.asarray(val["x"], dtype=float)
                vs = np.asarray(val["v"], dtype=float)
            except (KeyError, TypeError) as exc:
                raise ConfigError("potential table needs 'x' and 'v' lists") from exc
            if xs.shape != vs.shape or xs.size < 2 or np.any(np.diff(xs) <= 0):
                raise ConfigError("potential table needs increasing x and matching v")
            return lambda x: np.interp(x, xs, vs)
    raise ConfigError(f"cannot interpret potential specification {spec!r}")


@dataclass(frozen=True)
class SegmentModel:
    """Segment length, quadrature grid and real potential samples on it."""

    l: float
    v: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        v = np.asarray(self.v)
        if self.l <= 0:
            raise ValueError("segment length must be positive")
        if np.iscomplexobj(v) and np.any(v.imag != 0):
            raise ValueError("potential samples must be real")
        v = v.real.astype(float)
        if not (nodes.shape == weights.shape == v.shape and nodes.ndim == 1):
            raise ValueError("nodes, weights and v must be 1D arrays of equal length")
        if np.any(np.diff(nodes) <= 0) or nodes[0] <= 0 or nodes[-1] >= self.l:
            raise ValueError("nodes must increase strictly inside (0, l)")
        if np.any(weights <= 0) or abs(weights.sum() - self.l) > 1e-12 * self.l:
            raise ValueError("weights must be positive and sum to l")
        for name, val in (("nodes", nodes), ("weights", weights), ("v", v)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def h(self):
        return self.l / self.n_nodes

    def points(self):
        """Nodes embedded in R^3 as ``(x, 0, 0)``."""
        return np.column_stack([self.nodes, np.zeros((self.n_nodes, 2))])


def make_segment_model(l=1.0, potential=0.0, n_nodes=200):
    """Uniform midpoint grid with ``n_nodes`` nodes on ``[0, l]``."""
    n = int(n_nodes)
    if n < 1:
        raise ValueError("n_nodes must be positive")
    l = float(l)
    h = l / n
    nodes = (np.arange(n) + 0.5) * h
    v = np.asarray(make_potential(potential)(nodes), dtype=float)
    return SegmentModel(l, v, nodes, np.full(n, h))


def _q_kernel(e, r):
    """``(exp(i sqrt(z) r) - 1) / (4 pi r)`` with its limit ``i sqrt(z) / (4 pi)`` at 0."""
    r = np.asarray(r, dtype=float)
    k = e.sqrt_z
    safe = np.where(r > 0, r, 1.0)
    return np.where(r > 0, np.expm1(1j * k * safe) / (FOUR_PI * safe), 1j * k / FOUR_PI)


def build_segment_q(model, e):
    """Nyström matrix ``q(z | x_i, x_j) w_j`` of ``Q(z)``."""
    e = _as_energy(e)
    r = np.abs(model.nodes[:, None] - model.nodes[None, :])
    return _q_kernel(e, r) * model.weights[None, :]


@dataclass(frozen=True)
class SturmLiouvilleOp:
    """Dirichlet finite-difference matrix of ``-u'' + v u`` and its sorted eigenvalues."""

    matrix: np.ndarray
    eigenvalues: np.ndarray


def build_sturm_liouville(model):
    """Three-point Dirichlet discretisation of ``L`` on the model's nodes.

    Raises
    ------
    ZeroEigenvalue
        If some eigenvalue is within 1e-8 of zero.
    """
    n = model.n_nodes
    if n < 16:
        raise ValueError("need at least 16 nodes")
    h = model.h
    if np.max(np.abs(np.diff(model.nodes) - h)) > 1e-12 * model.l:
        raise ValueError("the Sturm-Liouville stencil needs the uniform midpoint grid")
    diag = np.full(n, 2.0 / h**2) + model.v
    diag[0] += 1.0 / h**2
    diag[-1] += 1.0 / h**2
    off = np.full(n - 1, -1.0 / h**2)
    ev = la.eigvalsh_tridiagonal(diag, off)
    if np.min(np.abs(ev)) < 1e-8:
        raise ZeroEigenvalue(
            f"zero is an eigenvalue of L (|lambda| = {np.min(np.abs(ev)):.2e})"
        )
    M = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    return SturmLiouvilleOp(M, ev)


def gstar_g_matrix(model, e):
    """Nyström matrix of ``G(z)^* G(z)``.

    The kernel is ``(g(z|r) - g(conj z|r)) / (z - conj z)``, with diagonal
    value ``i (sqrt z - sqrt(conj z)) / (4 pi (z - conj z))``.

    Raises
    ------
    RealEnergy
        If ``Im z == 0``.
    """
    e = _as_energy(e)
    if e.z.imag == 0:
        raise RealEnergy("G(z)^* G(z) needs a nonreal z")
    ec = e.conj()
    dz = e.z - ec.z
    r = np.abs(model.nodes[:, None] - model.nodes[None, :])
    safe = np.where(r > 0, r, 1.0)
    ker = np.where(
        r > 0,
        _green_increment(e, ec, safe) / dz,
        1j * (e.sqrt_z - ec.sqrt_z) / (FOUR_PI * dz),
    )
    return ker * model.weights[None, :]


def _segment_points(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.column_stack([x, np.zeros((x.size, 2))])


def free_resolvent_on_segment(e, source, x):
    """``(G(z)^* h)(x) = (R(conj z) h)(x, 0, 0)`` for a radial source ``h``."""
    e = _as_energy(e)
    out = source.resolvent(e.conj(), _segment_points(x))
    return out[0] if np.ndim(x) == 0 else out


def _system(model, e, sl=None):
    sl = sl if sl is not None else build_sturm_liouville(model)
    return sl.matrix + build_segment_q(model, e), sl


@dataclass(frozen=True)
class BoundaryTrace:
    """Trace ``u_f`` of the log singularity and the solution ``u_hat_h`` on the nodes."""

    nodes: np.ndarray
    u_f: np.ndarray
    u_hat_h: np.ndarray


@dataclass
class SegmentSolution:
    """Solved Krein system for one ``(model, z, source)``.

    ``u_star`` is ``G(conj z)^* h`` on the nodes and ``u_hat`` solves
    ``[L + Q(z)] u_hat = u_star``.
    """

    model: SegmentModel
    energy: Energy
    source: object
    u_star: np.ndarray
    u_hat: np.ndarray
    sl: SturmLiouvilleOp
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        m = self.model
        knots = np.concatenate([[0.0], m.nodes, [m.l]])
        vals = np.concatenate([[0.0], self.u_hat, [0.0]])
        self._spline = CubicSpline(knots, vals)
        self._knots = knots

    def u_hat_at(self, s):
        return self._spline(s)

    def trace(self):
        return BoundaryTrace(self.model.nodes, -self.u_hat / FOUR_PI, self.u_hat)

    def _near(self, p):
        """``(G(z) u_hat)(p)`` from the spline with the ``1/d`` part done exactly."""
        m, k = self.model, self.energy.sqrt_z
        x, rho = p[0], np.hypot(p[1], p[2])
        xc = min(max(x, 0.0), m.l)
        ux = self._spline(xc)
        spl = self._spline

        def f(s):
            d = np.sqrt((s - x) ** 2 + rho**2)
            u = spl(s)
            return (np.expm1(1j * k * d) * u + (u - ux)) / d

        knots = np.append(self._knots, xc)
        I0 = np.arcsinh((m.l - x) / rho) + np.arcsinh(x / rho)
        rest = quadrature.integrate(f, knots, rel_tol=1e-12, abs_tol=1e-18)
        return (ux * I0 + rest) / FOUR_PI

    def correction(self, points, near_factor=10.0):
        """``(G(z) u_hat)(P)``; Nyström sum far from the segment, spline quadrature near it."""
        m = self.model
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x = pts[:, 0]
        rho = np.hypot(pts[:, 1], pts[:, 2])
        gap = np.hypot(np.clip(x - m.l, 0, None) + np.clip(-x, 0, None), rho)
        out = np.empty(len(pts), dtype=complex)
        far = gap >= near_factor * m.h
        if far.any():
            d = np.sqrt((x[far, None] - m.nodes[None, :]) ** 2 + rho[far, None] ** 2)
            g = np.exp(1j * self.energy.sqrt_z * d) / (FOUR_PI * d)
            out[far] = g @ (m.weights * self.u_hat)
        for i in np.flatnonzero(~far):
            if rho[i] == 0 and 0 <= x[i] <= m.l:
                raise ValueError("G(z) u is singular on the segment itself")
            out[i] = self._near(pts[i])
        return out

    def field(self, points):
        """``(R_L(z) h)(P) = (R(z) h)(P) - (G(z) u_hat)(P)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.source.resolvent(self.energy, pts) - self.correction(pts)

    def q_apply_at(self, x):
        """``(Q(z) u_hat)(x)`` by quadrature on the spline."""
        e = self.energy
        spl = self._spline
        knots = np.append(self._knots, x)
        return quadrature.integrate(
            lambda s: _q_kernel(e, np.abs(s - x)) * spl(s), knots, rel_tol=1e-13, abs_tol=1e-18
        )


def solve_segment(model, e, source, sl=None):
    """Assemble and solve ``[L + Q(z)] u_hat = G(conj z)^* h``.

    Raises
    ------
    SingularLPlusQ
        If the system matrix is numerically singular.
    """
    e = _as_energy(e)
    M, sl = _system(model, e, sl)
    if np.linalg.cond(M) >= COND_MAX:
        raise SingularLPlusQ(f"L + Q(z) is singular at z = {e.z}")
    u_star = free_resolvent_on_segment(e.conj(), source, model.nodes)
    u_hat = la.solve(M, u_star)
    return SegmentSolution(model, e, source, u_star, u_hat, sl)


def apply_r_l(model, e, source, eval_points):
    """``R_L(z) h`` at ``eval_points`` as a :class:`GridFunction`.

    The solved system is attached as ``meta["solution"]``.
    """
    sol = solve_segment(model, e, source)
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    e = sol.energy
    return GridFunction(
        pts, sol.field(pts), {"z": [e.z.real, e.z.imag], "operator": "R_L", "solution": sol}
    )


def boundary_trace(model, e, source):
    return solve_segment(model, e, source).trace()


def correction_matrix(model, e, points):
    """Discrete kernel of ``G(z) [Q(z) + L]^{-1} G(conj z)^*`` between 3D points.

    ``M[a, b] = sum_jk g(z|P_a, s_j) w_j K_jk g(z|s_k, P_b)`` with
    ``K = (L + Q(z))^{-1}``.
    """
    e = _as_energy(e)
    M, _ = _system(model, e)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.linalg.norm(pts[:, None, :] - model.points()[None, :, :], axis=2)
    g = np.exp(1j * e.sqrt_z * d) / (FOUR_PI * d)
    return (g * model.weights) @ la.solve(M, g.T)


def negative_spectrum(model, kappa_range, n_scan=400):
    """Energies ``-kappa^2`` in the range at which ``L + Q(-kappa^2)`` is singular.

    Every eigenvalue of ``L + Q(-kappa^2)`` decreases in ``kappa``, so each
    zero crossing (of any eigenvalue) is located by scan and bisection.

    Returns
    -------
    list of (kappa, E)
    """
    lo, hi = map(float, kappa_range)
    if not 0 < lo < hi:
        return []
    sl = build_sturm_liouville(model)
    w = np.sqrt(model.weights)

    def mat(kappa):
        q = build_segment_q(model, Energy.from_kappa(kappa)).real
        # Similarity by W^(1/2) makes the Nyström part symmetric.
        S = sl.matrix + (w[:, None] * q) / w[None, :]
        return (S + S.T) / 2

    return [(k, -k * k) for k, _ in scan_crossings(mat, lo, hi, n_scan, xtol=1e-10)]


# ---------------------------------------------------------------------------
# behaviour near the segment


def _log_moment(du, x, l, knots=()):
    """``int_0^l sign(s - x) ln|s - x| du(s) ds``."""

    def f(s):
        return np.sign(s - x) * np.log(np.abs(s - x)) * du(s)

    return quadrature.integrate(
        f, [0.0, *knots, x, l], rel_tol=1e-12, abs_tol=1e-18, graded=True
    )


def simp1_residual(u, x, rho, l=1.0, du=None):
    """Remainder in the small-``rho`` expansion of the line potential of ``u``.

    Returns ``|int_0^l u(s) / sqrt((x-s)^2 + rho^2) ds - [u(x) ln(1/rho^2) +
    2 ln2 u(x) - int_0^l sign(s-x) ln|s-x| u'(s) ds]|``. ``u`` must vanish at
    both ends; ``du`` defaults to a fourth-order central difference of ``u``.
    """
    if not 0 < x < l:
        raise ValueError("x must lie inside (0, l)")
    if not 0 < rho < min(x, l - x):
        raise ValueError("rho must be positive and below the distance to the ends")
    if du is None:
        step = 1e-3 * l

        def du(s):
            # fourth-order central difference
            return (8 * (u(s + step) - u(s - step)) - (u(s + 2 * step) - u(s - 2 * step))) / (
                12 * step
            )

    ux = u(x)
    near = [max(0.0, x - 100 * rho), max(0.0, x - 10 * rho), min(l, x + 10 * rho), min(l, x + 100 * rho)]
    line = quadrature.integrate(
        lambda s: u(s) / np.sqrt((x - s) ** 2 + rho**2), [0.0, *near, x, l],
        rel_tol=1e-14, abs_tol=1e-18,
    )
    expansion = ux * np.log(1.0 / rho**2) + 2 * LN2 * ux - _log_moment(du, x, l)
    return float(abs(line - expansion))


@dataclass(frozen=True)
class TraceReport:
    """Approach of ``R_L(z) h`` to the segment along ``(x, rho/sqrt2, rho/sqrt2)``.

    ``ratio[k] = -f(rho_k) / ln(rho_k^2)``; ``u_f`` is the extrapolated limit,
    ``u_f_expected = -u_hat(x) / (4 pi)``. ``bracket[k]`` is
    ``f - ln(1/rho^2) u_f - 2 ln2 u_f + int sign(s-x) ln|s-x| u_f'(s) ds``
    and ``bracket_target = (L u_hat)(x) = -4 pi (L u_f)(x)`` its expected
    limit; ``bracket_rate`` is the fitted exponent ``p`` in
    ``|bracket[k] - bracket[k-1]| ~ rho^p``.
    """

    x: float
    rho: np.ndarray
    f: np.ndarray
    ratio: np.ndarray
    u_f: complex
    u_f_expected: complex
    bracket: np.ndarray
    bracket_target: complex
    bracket_rate: float

    @property
    def rel_error(self):
        scale = max(abs(self.u_f_expected), 1e-300)
        return abs(self.u_f - self.u_f_expected) / scale


def log_boundary_trace(model, e, source, x, rho_seq, stage_tol=0.1, solution=None):
    """Recover ``u_f = -lim f / ln(rho^2)`` for ``f = R_L(z) h`` and check it.

    ``f = -u_f ln(rho^2) + b + c rho + o(rho)``; the last three samples are
    fitted exactly with these three terms (two samples: slope only).

    Raises
    ------
    NonConvergentExtrapolation
        If the fitted estimate and the plain slope through the last two
        samples differ by more than ``stage_tol`` relative to the trace size.
    """
    rho = np.asarray(rho_seq, dtype=float)
    if rho.size < 2 or np.any(np.diff(rho) >= 0) or rho[0] > model.l / 10 or rho[-1] <= 0:
        raise ValueError("rho_seq must decrease within (0, l/10] and hold two values")
    if not 0 < x < model.l:
        raise ValueError("x must lie inside the segment")
    sol = solution if solution is not None else solve_segment(model, e, source)
    pts = np.column_stack([np.full(rho.size, x), rho / np.sqrt(2), rho / np.sqrt(2)])
    f = sol.field(pts)
    lr = np.log(rho**2)
    ratio = -f / lr
    pair = -(f[-1] - f[-2]) / (lr[-1] - lr[-2])
    if rho.size >= 3:
        # f = -u_f ln(rho^2) + b + c rho: the off-axis gradient of R(z) h
        # contributes the linear term.
        basis = np.column_stack([-lr[-3:], np.ones(3), rho[-3:]])
        u_f = la.solve(basis, f[-3:])[0]
    else:
        u_f = pair
    u_hat_x = complex(sol.u_hat_at(x))
    expected = -u_hat_x / FOUR_PI
    scale = max(abs(u_f), abs(expected), 1e-12 * np.max(np.abs(f)), 1e-300)
    if abs(u_f - pair) > stage_tol * scale:
        raise NonConvergentExtrapolation(
            f"trace estimates {pair:.6g} and {u_f:.6g} disagree"
        )
    dspl = sol._spline.derivative()
    moment = _log_moment(lambda s: -dspl(s) / FOUR_PI, x, model.l, knots=sol._knots[1:-1])
    bracket = f - (np.log(1.0 / rho**2) + 2 * LN2) * expected + moment
    u_star_x = source.resolvent(sol.energy, _segment_points(x))[0]
    target = u_star_x - sol.q_apply_at(x)
    diffs = np.abs(np.diff(bracket))
    good = diffs > 0
    if good.sum() >= 2:
        rate = float(np.polyfit(np.log(rho[1:][good]), np.log(diffs[good]), 1)[0])
    else:
        rate = float("nan")
    return TraceReport(float(x), rho, f, ratio, complex(u_f), complex(expected), bracket,
                       complex(target), rate)

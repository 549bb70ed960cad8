r"""Free resolvent kernel of the 3D Laplacian and point-set matrices built from it.

The free resolvent :math:`(-\Delta - z)^{-1}` acts by convolution with

.. math::

    g(z|r) = \frac{e^{i\sqrt{z}\,r}}{4\pi r}, \qquad \operatorname{Im}\sqrt{z} \ge 0,

so every quantity here reduces to evaluations of :func:`free_green` at
pairwise distances, plus a one-dimensional radial reduction for
spherically symmetric sources.
"""
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from . import quadrature
from .errors import CoincidentCenters, CoincidentShift, ZeroSeparation

__all__ = [
    "Energy",
    "PointConfiguration",
    "sqrt_upper",
    "free_green",
    "point_q_matrix",
    "green_inner_product",
    "gram_neg_energy",
    "lattice_tail_bound",
    "cubic_lattice",
    "InnerProduct",
    "RadialSource",
    "GaussianSource",
    "HelmholtzImageSource",
    "GreenSource",
    "ResolventSource",
    "SourceSum",
]

FOUR_PI = 4.0 * np.pi


def sqrt_upper(z):
    """Square root on the branch ``Im w >= 0``.

    On the positive real axis the upper-edge limit (a nonnegative real) is
    returned. Works elementwise on arrays.

    >>> sqrt_upper(-9)
    3j
    >>> sqrt_upper(3 + 4j)
    (2+1j)
    """
    w = np.sqrt(np.asarray(z, dtype=complex))
    w = np.where(w.imag < 0, -w, w)
    # -0.0 imaginary parts would otherwise leak through on the real axis.
    w = np.where((w.imag == 0) & (w.real < 0), -w, w)
    return w[()] if w.ndim == 0 else w


@dataclass(frozen=True)
class Energy:
    """A spectral parameter ``z`` together with its physical square root.

    Use :meth:`from_kappa` for energies ``-kappa**2`` below the continuum;
    the root is then exactly ``1j * kappa``.
    """

    z: complex
    sqrt_z: complex
    kappa: float | None = None

    @classmethod
    def from_z(cls, z):
        z = complex(z)
        k = complex(sqrt_upper(z))
        kappa = k.imag if (z.imag == 0 and z.real < 0) else None
        return cls(z, k, kappa)

    @classmethod
    def from_kappa(cls, kappa):
        kappa = float(kappa)
        if kappa < 0:
            raise ValueError("kappa must be nonnegative")
        return cls(complex(-kappa * kappa, 0.0), complex(0.0, kappa), kappa)

    @property
    def is_real(self):
        return self.z.imag == 0

    def conj(self):
        """Energy at the complex-conjugate point, ``sqrt(conj z) = -conj(sqrt z)``."""
        k = -np.conj(self.sqrt_z)
        if k.imag == 0 and k.real < 0:
            k = -k
        return Energy(np.conj(self.z), complex(k), self.kappa)


def _as_energy(e):
    return e if isinstance(e, Energy) else Energy.from_z(e)


def free_green(e, r):
    """``exp(i sqrt(z) r) / (4 pi r)`` for ``r > 0`` (scalar or array)."""
    e = _as_energy(e)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ZeroSeparation("free Green's function needs r > 0")
    out = np.exp(1j * e.sqrt_z * r) / (FOUR_PI * r)
    return out[()] if out.ndim == 0 else out


def _green_increment(e, e0, r):
    """``g(z|r) - g(z0|r)`` without cancellation for small ``r``."""
    dk = e.sqrt_z - e0.sqrt_z
    # e^{ik r} - e^{ik0 r} = e^{ik0 r} (e^{i dk r} - 1)
    return np.exp(1j * e0.sqrt_z * r) * np.expm1(1j * dk * r) / (FOUR_PI * r)


@dataclass(frozen=True)
class PointConfiguration:
    """Finitely many interaction centers in R^3.

    ``d`` is the minimal pairwise distance (``inf`` for a single center).
    """

    centers: np.ndarray
    d: float = field(init=False)

    def __post_init__(self):
        c = np.array(self.centers, dtype=float)
        if c.ndim == 1:
            c = c.reshape(1, -1)
        if c.ndim != 2 or c.shape[1] != 3:
            raise ValueError(f"centers must have shape (N, 3), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("centers must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)
        d = float(pdist(c).min()) if len(c) > 1 else np.inf
        if d < 1e-12:
            raise CoincidentCenters(f"two centers closer than 1e-12 (d = {d:.3e})")
        object.__setattr__(self, "d", d)

    def __len__(self):
        return len(self.centers)

    def distances(self):
        return squareform(pdist(self.centers)) if len(self) > 1 else np.zeros((1, 1))


def cubic_lattice(dims, spacing=1.0, origin=(0.0, 0.0, 0.0)):
    """Finite simple-cubic lattice ``origin + spacing * (i, j, k)``."""
    dims = tuple(int(n) for n in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError("dims must be three positive integers")
    idx = np.array(list(itertools.product(*(range(n) for n in dims))), dtype=float)
    return PointConfiguration(np.asarray(origin, dtype=float) + spacing * idx)


def point_q_matrix(cfg, e):
    """Krein Q-matrix of a point set.

    Diagonal ``i sqrt(z) / (4 pi)``, off-diagonal ``g(z | |x_m - x_n|)``.
    """
    e = _as_energy(e)
    n = len(cfg)
    q = np.empty((n, n), dtype=complex)
    if n > 1:
        dist = cfg.distances()
        off = ~np.eye(n, dtype=bool)
        q[off] = free_green(e, dist[off])
    np.fill_diagonal(q, 1j * e.sqrt_z / FOUR_PI)
    return q


def gram_neg_energy(cfg, kappa):
    """Gram matrix of ``g(-kappa^2 | . - x_n)``: ``exp(-kappa |x_m - x_n|) / (8 pi kappa)``."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return np.exp(-kappa * cfg.distances()) / (8.0 * np.pi * kappa)


def lattice_tail_bound(cfg, m, kappa, term_floor=1e-16):
    """Row sum of ``exp(-kappa |x_n - x_m|)`` over ``n != m`` and its shell bound.

    The bound is ``13/4 e^{-kappa d} + sum_{n>=2} (3 n^2 + 1/4) e^{-(n - 1/2) kappa d}``,
    truncated once terms drop below ``term_floor``.

    Returns
    -------
    rowsum, bound : float
    """
    c = cfg.centers
    r = np.linalg.norm(np.delete(c, m, axis=0) - c[m], axis=1)
    rowsum = float(np.exp(-kappa * r).sum())
    d = cfg.d
    if not np.isfinite(d):
        return rowsum, 0.0
    bound = 3.25 * np.exp(-kappa * d)
    n = 2
    while True:
        term = (3 * n * n + 0.25) * np.exp(-(n - 0.5) * kappa * d)
        bound += term
        # Terms decrease once past the polynomial hump.
        if term < term_floor and n > 1.0 / (kappa * d) + 2:
            break
        n += 1
    return rowsum, float(bound)


# ---------------------------------------------------------------------------
# radial sources and the 1D reduction of the free resolvent


def _sinc(w):
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < 1e-4
    safe = np.where(small, 1.0, w)
    return np.where(small, 1.0 - w * w / 6.0, np.sin(safe) / safe)


def _radial_kernel(k, r, R):
    """Spherical average of ``e^{ik|x-x'|}/(4 pi |x-x'|)`` times ``4 pi r^2``.

    Equals ``r (e^{ik(R+r)} - e^{ik|R-r|}) / (2ikR)``; ``(R g)(R) = int p(r) K dr``.
    """
    lo, hi = np.minimum(r, R), np.maximum(r, R)
    if abs(k) * R < 1.0:
        return r * lo / R * np.exp(1j * k * hi) * _sinc(k * lo) if R > 0 else (
            r * np.exp(1j * k * r)
        )
    return r * (np.exp(1j * k * (hi + lo)) - np.exp(1j * k * (hi - lo))) / (2j * k * R)


class RadialSource:
    """A spherically symmetric source ``h(x) = profile(|x - center|)``.

    Subclasses implement :meth:`profile` and :meth:`radii`, the latter
    listing radii where the profile has structure; its last entry is a tail
    radius beyond which the profile is negligible.
    """

    center = np.zeros(3)

    def profile(self, r):
        raise NotImplementedError

    def radii(self):
        raise NotImplementedError

    def radial_resolvent(self, e, R, rel_tol=1e-12, abs_tol=1e-17):
        """``(R(z) h)`` at distance ``R`` from the center (scalar ``R``)."""
        e = _as_energy(e)
        k = e.sqrt_z
        R = float(R)
        knots = [0.0, *self.radii()]
        tail = knots[-1]
        if 0 < R < tail:
            knots.append(R)

        def f(r):
            return self.profile(r) * _radial_kernel(k, r, R)

        return quadrature.integrate(f, knots, rel_tol=rel_tol, abs_tol=abs_tol)

    def resolvent(self, e, points, **kw):
        """``(R(z) h)(P)`` for each row of ``points`` (shape ``(M, 3)``)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        R = np.linalg.norm(pts - self.center, axis=1)
        uniq, inv = np.unique(R, return_inverse=True)
        vals = np.array([self.radial_resolvent(e, r, **kw) for r in uniq], dtype=complex)
        return vals[inv]

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.profile(np.linalg.norm(pts - self.center, axis=1))

    def radial_mass(self):
        """``int h dx`` by radial quadrature."""
        return quadrature.integrate(
            lambda r: FOUR_PI * r * r * self.profile(r), [0.0, *self.radii()]
        )


class GaussianSource(RadialSource):
    """``amplitude * exp(-|x - center|^2 / (2 width^2))``."""

    def __init__(self, center, width, amplitude=1.0):
        if width <= 0:
            raise ValueError("width must be positive")
        self.center = np.asarray(center, dtype=float).reshape(3)
        self.width = float(width)
        self.amplitude = amplitude

    def profile(self, r):
        return self.amplitude * np.exp(-0.5 * (np.asarray(r) / self.width) ** 2)

    def radii(self):
        s = self.width
        return [s, 2 * s, 4 * s, 7 * s, 12 * s]

    @property
    def mass(self):
        return self.amplitude * (2.0 * np.pi * self.width**2) ** 1.5


class HelmholtzImageSource(GaussianSource):
    """``(-Delta - z) phi`` for the Gaussian ``phi``; its free resolvent at ``z`` is ``phi``.

    ``phi`` is available as :meth:`phi` and serves as the exact answer.
    """

    def __init__(self, center, width, z, amplitude=1.0):
        super().__init__(center, width, amplitude)
        self.z = complex(z)

    def profile(self, r):
        r = np.asarray(r)
        s2 = self.width**2
        return (3.0 / s2 - r * r / (s2 * s2) - self.z) * super().profile(r)

    def phi(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return GaussianSource.profile(self, np.linalg.norm(pts - self.center, axis=1))

    @property
    def mass(self):
        # The Laplacian part integrates to zero.
        return -self.z * super().mass


class GreenSource(RadialSource):
    """``coefficient * g(z0 | |x - center|)`` used as a source."""

    def __init__(self, center, energy, coefficient=1.0):
        self.center = np.asarray(center, dtype=float).reshape(3)
        self.energy = _as_energy(energy)
        self.coefficient = complex(coefficient)
        if self.energy.sqrt_z.imag <= 0:
            raise ValueError("GreenSource needs Im sqrt(z0) > 0 to be square integrable")

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, 1.0)
        return np.where(
            r > 0,
            self.coefficient * np.exp(1j * self.energy.sqrt_z * safe) / (FOUR_PI * safe),
            np.inf,
        )

    def radii(self):
        lam = 1.0 / self.energy.sqrt_z.imag
        return [lam, 4 * lam, 12 * lam, 40 * lam]


class ResolventSource(RadialSource):
    """The radial function ``R(z) h`` of another radial source ``h``, used as a source."""

    def __init__(self, inner, energy):
        self.inner = inner
        self.center = inner.center
        self.energy = _as_energy(energy)
        if self.energy.sqrt_z.imag <= 0:
            raise ValueError("ResolventSource needs Im sqrt(z) > 0")

    def profile(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        uniq, inv = np.unique(r, return_inverse=True)
        vals = np.array(
            [self.inner.radial_resolvent(self.energy, x, rel_tol=1e-13) for x in uniq]
        )
        return vals[inv].reshape(r.shape)

    def radii(self):
        inner = self.inner.radii()
        return [*inner, inner[-1] + 40.0 / self.energy.sqrt_z.imag]


class SourceSum:
    """Finite linear combination of radial sources (each with its own center)."""

    def __init__(self, terms):
        self.terms = [(complex(c), s) for c, s in terms]

    def resolvent(self, e, points, **kw):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(pts), dtype=complex)
        for c, s in self.terms:
            out += c * s.resolvent(e, pts, **kw)
        return out

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return sum(c * s(pts) for c, s in self.terms)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InnerProduct:
    """``(g_a(z), g_b(conj z0))`` evaluated two ways."""

    closed_form: complex
    quadrature: complex

    @property
    def rel_error(self):
        return abs(self.closed_form - self.quadrature) / abs(self.closed_form)


def green_inner_product(e, e0, a, b):
    """Inner product of Green's functions centered at ``a`` and ``b``.

    The closed form is ``(g(z|r) - g(z0|r)) / (z - z0)`` with ``r = |a - b|``
    (``i (sqrt z - sqrt z0) / (4 pi (z - z0))`` when ``a == b``). The
    quadrature route integrates ``g(z|x - a) g(z0|x - b)`` over R^3 with the
    radial reduction about ``b``.
    """
    e, e0 = _as_energy(e), _as_energy(e0)
    if e.z == e0.z:
        raise CoincidentShift("z and z0 must differ")
    a = np.asarray(a, dtype=float).reshape(3)
    b = np.asarray(b, dtype=float).reshape(3)
    r = float(np.linalg.norm(a - b))
    dz = e.z - e0.z
    if r == 0:
        closed = 1j * (e.sqrt_z - e0.sqrt_z) / (FOUR_PI * dz)
    else:
        closed = _green_increment(e, e0, r) / dz
    # conj(g(conj z0|.)) = g(z0|.), so the integrand is g(z|x-a) g(z0|x-b).
    quad = GreenSource(b, e0).radial_resolvent(e, r, rel_tol=1e-13, abs_tol=1e-20)
    return InnerProduct(complex(closed), complex(quad))


def distances_to(points, centers):
    """Euclidean distances, shape ``(len(points), len(centers))``."""
    return cdist(np.atleast_2d(points), np.atleast_2d(centers))

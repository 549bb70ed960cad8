"""Finite-dimensional Krein resolvent formula with a brute-force oracle.

For a Hermitian matrix ``A``, channel vectors ``F = [f_1 .. f_N]`` and a
Hermitian coupling ``W``, the perturbed resolvent is

    R_1(z) = R(z) - R(z) F [Q(z) + W]^{-1} F^H R(z),   Q(z) = F^H R(z) F,

which must coincide with ``(A + F W^{-1} F^H - z)^{-1}`` (:func:`direct_perturbed`).
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import (
    InvertibleW,
    ModelError,
    NonInvertibleW,
    QPlusWSingular,
    SingularShift,
)

__all__ = [
    "FiniteModel",
    "QMatrixFD",
    "CompressedResolvent",
    "finite_resolvent",
    "gram_q",
    "krein_rank_n",
    "direct_perturbed",
    "compress_singular_w",
    "hilbert_residual",
    "conjugate_symmetry_residual",
    "random_finite_model",
    "random_nonreal",
]

HERMITIAN_TOL = 1e-12
COND_MAX = 1e12
SPECTRUM_GAP = 1e-10


def _hermitian(M, name):
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ModelError(f"{name} must be square, got shape {M.shape}")
    if M.size and np.max(np.abs(M - M.conj().T)) > HERMITIAN_TOL:
        raise ModelError(f"{name} is not Hermitian")
    return M


@dataclass(frozen=True)
class FiniteModel:
    """Hermitian ``A`` (n x n), channels ``F`` (n x N, full column rank), Hermitian ``W`` (N x N)."""

    A: np.ndarray
    F: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        A = _hermitian(self.A, "A")
        n = A.shape[0]
        F = np.asarray(self.F, dtype=complex)
        if F.size == 0:
            F = np.zeros((n, 0), dtype=complex)
        if F.ndim != 2 or F.shape[0] != n:
            raise ModelError(f"F must have shape ({n}, N), got {F.shape}")
        N = F.shape[1]
        if N > n:
            raise ModelError("more channel vectors than the space dimension")
        if N:
            s = la.svdvals(F)
            if s[-1] <= 1e-10 * s[0]:
                raise ModelError("channel vectors are linearly dependent")
        W = np.asarray(self.W, dtype=complex).reshape(N, N)
        W = _hermitian(W, "W") if N else W
        for name, val in (("A", A), ("F", F), ("W", W)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def N(self):
        return self.F.shape[1]

    def w_is_invertible(self):
        return self.N == 0 or np.linalg.cond(self.W) < COND_MAX


@dataclass(frozen=True)
class QMatrixFD:
    """``Q[m, n] = (R(z) f_n, f_m)`` at a given ``z``."""

    z: complex
    Q: np.ndarray

    def imaginary_part(self):
        """``(Q - Q^H) / (z - conj z)``; positive semidefinite for nonreal ``z``."""
        return (self.Q - self.Q.conj().T) / (self.z - np.conj(self.z))


def finite_resolvent(A, z):
    """``(A - z I)^{-1}`` by LU solve.

    Raises
    ------
    SingularShift
        If ``z`` is within ``1e-10`` of an eigenvalue of ``A``.
    """
    A = np.asarray(A, dtype=complex)
    ev = la.eigvalsh(A) if A.size else np.array([])
    if ev.size and np.min(np.abs(ev - z)) <= SPECTRUM_GAP:
        raise SingularShift(f"z = {z} lies on the spectrum")
    n = A.shape[0]
    return la.solve(A - z * np.eye(n), np.eye(n, dtype=complex))


def gram_q(model, z):
    R = finite_resolvent(model.A, z)
    return QMatrixFD(complex(z), model.F.conj().T @ R @ model.F)


def _krein(model, z, W):
    R = finite_resolvent(model.A, z)
    if model.N == 0:
        return R
    F = model.F
    M = F.conj().T @ R @ F + W
    if np.linalg.cond(M) >= COND_MAX:
        raise QPlusWSingular(f"Q(z) + W is singular at z = {z}")
    RF = R @ F
    # R(z) F [Q+W]^{-1} (R(conj z) F)^H, and R(conj z) = R(z)^H.
    return R - RF @ la.solve(M, F.conj().T @ R)


def krein_rank_n(model, z):
    """Perturbed resolvent ``R_1(z)`` from the rank-N Krein formula.

    Raises
    ------
    NonInvertibleW
        If ``W`` is singular (condition number >= 1e12); see
        :func:`compress_singular_w`.
    QPlusWSingular
        If ``Q(z) + W`` is numerically singular.
    """
    if not model.w_is_invertible():
        raise NonInvertibleW("W is singular; use compress_singular_w")
    return _krein(model, z, model.W)


def perturbed_operator(model):
    """``A_1 = A + F W^{-1} F^H``."""
    if not model.w_is_invertible():
        raise NonInvertibleW("W is singular")
    if model.N == 0:
        return model.A.copy()
    Winv = la.inv(model.W)
    return model.A + model.F @ Winv @ model.F.conj().T


def direct_perturbed(model, z):
    """Brute-force resolvent ``(A_1 - z)^{-1}`` of the explicitly assembled perturbation."""
    A1 = perturbed_operator(model)
    return finite_resolvent((A1 + A1.conj().T) / 2, z)


@dataclass(frozen=True)
class CompressedResolvent:
    """Restriction of ``R_1(z)`` to the orthogonal complement of its kernel.

    ``projector`` is the orthogonal projector onto that complement,
    ``basis`` an orthonormal basis of it (columns) and ``matrix`` the
    restricted resolvent in that basis. ``full`` is ``R_1(z)`` itself.
    """

    z: complex
    projector: np.ndarray
    basis: np.ndarray
    matrix: np.ndarray
    full: np.ndarray
    kernel_basis: np.ndarray


def _w_null_space(W, rtol=1e-12):
    if W.size == 0:
        return np.zeros((0, 0), dtype=complex)
    u, s, vh = la.svd(W)
    scale = max(s[0], 1.0)
    return vh[s <= rtol * scale].conj().T


def compress_singular_w(model, z):
    """Krein formula for a singular ``W``, compressed to the complement of its kernel.

    The kernel of ``R_1(z)`` is ``F ker(W)``; ``R_1(z)`` leaves its orthogonal
    complement invariant and is a resolvent there.

    Raises
    ------
    InvertibleW
        If ``W`` has trivial null space.
    """
    K = _w_null_space(model.W)
    if K.shape[1] == 0:
        raise InvertibleW("W is invertible; use krein_rank_n")
    R1 = _krein(model, z, model.W)
    # Orthonormal bases of F ker(W) and of its complement.
    span, _ = la.qr(model.F @ K, mode="economic")
    full_q, _ = la.qr(span, mode="full")
    k = span.shape[1]
    comp = full_q[:, k:]
    P = comp @ comp.conj().T
    return CompressedResolvent(complex(z), P, comp, comp.conj().T @ R1 @ comp, R1, span)


def hilbert_residual(resolvent_map, z1, z2):
    """Spectral norm of ``R(z1) - R(z2) - (z1 - z2) R(z1) R(z2)``."""
    R1, R2 = resolvent_map(z1), resolvent_map(z2)
    return float(np.linalg.norm(R1 - R2 - (z1 - z2) * (R1 @ R2), 2))


def conjugate_symmetry_residual(resolvent_map, z):
    """Spectral norm of ``R(conj z) - R(z)^H``."""
    return float(np.linalg.norm(resolvent_map(np.conj(z)) - resolvent_map(z).conj().T, 2))


# ---------------------------------------------------------------------------
# seeded random instances


def _unit_square(rng, shape):
    return rng.uniform(size=shape) + 1j * rng.uniform(size=shape)


def random_finite_model(rng, n, N, singular_w=False):
    """Random ``FiniteModel`` with entries uniform on the complex unit square.

    ``A = (M + M^H) / 2``; ``W`` is built the same way. With
    ``singular_w`` the last diagonal entry of a diagonalised ``W`` is zeroed,
    giving a one-dimensional null space.
    """
    M = _unit_square(rng, (n, n))
    A = (M + M.conj().T) / 2
    while True:
        F = _unit_square(rng, (n, N))
        if N == 0 or la.svdvals(F)[-1] > 1e-3:
            break
    while True:
        M = _unit_square(rng, (N, N))
        W = (M + M.conj().T) / 2
        if N == 0 or np.linalg.cond(W) < 1e6:
            break
    if singular_w and N:
        ev, U = la.eigh(W)
        ev[np.argmin(np.abs(ev))] = 0.0
        W = (U * ev) @ U.conj().T
        W = (W + W.conj().T) / 2
    return FiniteModel(A, F, W)


def random_nonreal(rng, size=None, re_span=3.0, im_range=(0.2, 3.0)):
    """Random points off the real axis, either half-plane."""
    re = rng.uniform(-re_span, re_span, size)
    im = rng.uniform(*im_range, size) * rng.choice([-1.0, 1.0], size)
    return re + 1j * im

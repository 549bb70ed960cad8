import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kreinlab.errors import (
    InvertibleW,
    ModelError,
    NonInvertibleW,
    QPlusWSingular,
    SingularShift,
)
from kreinlab.krein_core import (
    FiniteModel,
    compress_singular_w,
    conjugate_symmetry_residual,
    direct_perturbed,
    finite_resolvent,
    gram_q,
    hilbert_residual,
    krein_rank_n,
    random_finite_model,
    random_nonreal,
)


def test_two_by_two_example():
    # A = diag(1, 2), F = e1, W = 1: A_1 = diag(2, 2)
    m = FiniteModel(np.diag([1.0, 2.0]), [[1.0], [0.0]], [[1.0]])
    z = 0.5j
    assert np.allclose(krein_rank_n(m, z), np.eye(2) / (2 - z), atol=1e-14)


def test_no_channels_returns_free_resolvent():
    A = np.diag([1.0, 3.0])
    m = FiniteModel(A, np.zeros((2, 0)), np.zeros((0, 0)))
    assert np.allclose(krein_rank_n(m, 1j), finite_resolvent(A, 1j))


def test_validation():
    with pytest.raises(ModelError):
        FiniteModel([[0, 1], [2, 0]], [[1], [0]], [[1]])
    with pytest.raises(ModelError):
        FiniteModel(np.eye(2), [[1, 2], [2, 4]], np.eye(2))
    with pytest.raises(SingularShift):
        finite_resolvent(np.diag([1.0, 2.0]), 1.0)


def test_singular_w_paths():
    m = FiniteModel(np.diag([1.0, 2.0, 3.0]), np.eye(3)[:, :2], np.diag([1.0, 0.0]))
    with pytest.raises(NonInvertibleW):
        krein_rank_n(m, 1j)
    c = compress_singular_w(m, 1j)
    # e2 = F ker W is annihilated; on its complement we see diag(2, 3)
    assert np.allclose(c.full @ [0, 1, 0], 0, atol=1e-12)
    ev = np.sort_complex(np.linalg.eigvals(c.matrix))
    assert np.allclose(ev, np.sort_complex(1 / (np.array([2.0, 3.0]) - 1j)))
    inv = FiniteModel(np.eye(2), [[1.0], [0.0]], [[2.0]])
    with pytest.raises(InvertibleW):
        compress_singular_w(inv, 1j)


def test_q_plus_w_singular():
    # A = 1, F = 1: Q(z) = 1/(1 - z), so Q(0) + W = 0 for W = -1
    m = FiniteModel(np.diag([1.0]), [[1.0]], [[-1.0]])
    with pytest.raises(QPlusWSingular):
        krein_rank_n(m, 0.0)


def test_q_function_is_nevanlinna(rng):
    m = random_finite_model(rng, 8, 3)
    for z in random_nonreal(rng, 5):
        q = gram_q(m, z)
        assert np.linalg.eigvalsh(q.imaginary_part())[0] > -1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 16), st.integers(1, 4))
def test_krein_matches_direct_inverse(seed, n, N):
    rng = np.random.default_rng(seed)
    N = min(N, n)
    m = random_finite_model(rng, n, N)
    for z in random_nonreal(rng, 3):
        D = direct_perturbed(m, z)
        assert np.linalg.norm(krein_rank_n(m, z) - D, 2) <= 1e-10 * np.linalg.norm(D, 2)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_resolvent_axioms_property(seed):
    rng = np.random.default_rng(seed)
    m = random_finite_model(rng, 10, 3)
    z1, z2 = random_nonreal(rng, 2)
    R = lambda z: krein_rank_n(m, z)  # noqa: E731
    assert hilbert_residual(R, z1, z2) < 1e-10
    assert conjugate_symmetry_residual(R, z1) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_compression_property(seed):
    rng = np.random.default_rng(seed)
    m = random_finite_model(rng, 9, 3, singular_w=True)
    z1, z2 = random_nonreal(rng, 2)
    c = compress_singular_w(m, z1)
    assert np.linalg.norm(c.full @ c.kernel_basis, 2) < 1e-12
    Rc = lambda z: compress_singular_w(m, z).matrix  # noqa: E731
    assert hilbert_residual(Rc, z1, z2) < 1e-10
    assert conjugate_symmetry_residual(Rc, z1) < 1e-10


def test_random_generators_are_seeded():
    a = random_finite_model(np.random.default_rng(3), 5, 2)
    b = random_finite_model(np.random.default_rng(3), 5, 2)
    assert np.array_equal(a.A, b.A) and np.array_equal(a.W, b.W)
    z = random_nonreal(np.random.default_rng(1), 100)
    assert np.all(np.abs(z.imag) >= 0.2)

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

from dynlap import reliability, seba
from dynlap.errors import NotOrthonormal, RankCollapseWarning
from dynlap.seba import SebaBasis, soft_threshold, span_residual

N = 1000


def indicators(*ranges, n=N):
    cols = []
    for a, b in ranges:
        v = np.zeros(n)
        v[a:b] = 1.0
        cols.append(v)
    return np.column_stack(cols)


def normalized(X):
    return X / np.linalg.norm(X, axis=0)


def match_columns(S, target):
    """Largest entrywise error after pairing columns of S with target columns (any order)."""
    from itertools import permutations

    best = np.inf
    for perm in permutations(range(target.shape[1])):
        best = min(best, np.max(np.abs(S - target[:, perm])))
    return best


def test_soft_threshold():
    z = np.array([-2.0, -0.5, 0.0, 0.3, 1.5])
    assert np.allclose(soft_threshold(z, 0.5), [-1.5, 0, 0, 0, 1.0])


def test_disjoint_indicators_are_fixed():
    X = indicators((0, 400), (400, 700))
    basis = seba(normalized(X))
    assert match_columns(basis.vectors, X) <= 1e-10
    assert basis.iterations == 1


def test_rotated_indicators_recovered():
    X = indicators((0, 400), (400, 700))
    c = np.cos(np.pi / 4)
    R = np.array([[c, -c], [c, c]])
    basis = seba(normalized(X) @ R)
    S = basis.vectors
    assert np.all(np.minimum(np.abs(S), np.abs(S - 1)) <= 1e-6)
    assert match_columns(S, X) <= 1e-6


def test_brute_force_angle_agrees():
    # the recovered rotation minimizes the l1 norm over the one-parameter family
    X = normalized(indicators((0, 400), (400, 700)))
    theta0 = 0.3
    c, s = np.cos(theta0), np.sin(theta0)
    V = X @ np.array([[c, -s], [s, c]])
    angles = np.linspace(0, np.pi / 2, 2001)
    l1 = [np.abs(V @ np.array([[np.cos(a), np.sin(a)], [-np.sin(a), np.cos(a)]])).sum() for a in angles]
    best = angles[int(np.argmin(l1))]
    assert best == pytest.approx(theta0, abs=1e-3)
    assert match_columns(seba(V).vectors, indicators((0, 400), (400, 700))) <= 1e-6


def test_identity_start_stalls_on_symmetric_mix():
    # the identity rotation is a stationary point for an evenly mixed pair
    X = normalized(indicators((0, 400), (400, 700)))
    c = np.cos(np.pi / 4)
    V = X @ np.array([[c, -c], [c, c]])
    stalled = seba(V, R0="identity")
    assert stalled.iterations == 1
    assert reliability(stalled)[1].any()


def test_constant_vector_r1():
    basis = seba(np.full((50, 1), 1 / np.sqrt(50)))
    assert np.array_equal(basis.vectors, np.ones((50, 1)))


def test_basis_invariants():
    rng = np.random.default_rng(0)
    X = indicators((0, 300), (300, 550), (600, 800)) + 0.01 * rng.standard_normal((N, 3))
    V, _ = np.linalg.qr(X)
    basis = seba(V)
    R = basis.rotation
    assert np.max(np.abs(R @ R.T - np.eye(3))) <= 1e-10
    assert np.allclose(basis.vectors.max(axis=0), 1.0)
    assert np.all((basis.vectors == 0).sum(axis=0) >= 1)
    assert np.array_equal(basis.min_values, basis.vectors.min(axis=0))
    big = (basis.vectors >= 0.5).sum(axis=0)
    assert np.all(np.diff(big) <= 0)
    assert span_residual(V, basis.vectors) <= 0.1


def test_determinism_bit_exact():
    rng = np.random.default_rng(1)
    V, _ = np.linalg.qr(indicators((0, 500), (500, 900)) + 0.05 * rng.standard_normal((N, 2)))
    a, b = seba(V), seba(V)
    assert np.array_equal(a.vectors, b.vectors) and np.array_equal(a.rotation, b.rotation)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rotation_invariance(seed):
    rng = np.random.default_rng(seed)
    X = indicators((0, 300), (300, 550), (600, 800)) + 0.01 * rng.standard_normal((N, 3))
    V, _ = np.linalg.qr(X)
    Q = ortho_group.rvs(3, random_state=seed)
    a = seba(V).vectors
    b = seba(V @ Q).vectors
    assert match_columns(np.abs(b), np.abs(a)) <= 1e-8


def test_mass_inner_product():
    rng = np.random.default_rng(2)
    w = rng.uniform(0.5, 2.0, N) / N
    M = sp.diags(w)
    X = indicators((0, 400), (400, 700))
    V = X / np.sqrt(X.T @ (w[:, None] * X)).diagonal()
    basis = seba(V, mass=M)
    assert match_columns(basis.vectors, X) <= 1e-10
    with pytest.raises(NotOrthonormal):
        seba(V)


def test_not_orthonormal():
    with pytest.raises(NotOrthonormal):
        seba(np.ones((10, 2)))


def test_rank_collapse_drops_column():
    X = normalized(indicators((0, 900), (900, 1000)))
    with pytest.warns(RankCollapseWarning):
        basis = seba(X, mu=0.04)
    assert basis.r == 1
    assert basis.vectors[900:, 0].min() == 1.0


def test_reliability_flags():
    clean = seba(normalized(indicators((0, 400), (400, 700))))
    mins, flags = reliability(clean)
    assert not flags.any()
    vectors = np.column_stack([np.linspace(-0.5, 1, 10), np.linspace(0, 1, 10)])
    manual = SebaBasis(vectors, np.eye(2), 0.1, 1, vectors.min(axis=0))
    assert reliability(manual)[1].tolist() == [True, False]


def test_reliability_flags_third_vector_without_a_feature():
    rng = np.random.default_rng(3)
    X = indicators((0, 400), (400, 700))
    third = rng.standard_normal(N)
    V, _ = np.linalg.qr(np.column_stack([X, third]))
    basis = seba(V)
    _, flags = reliability(basis)
    assert flags.any()


def test_span_residual_zero_for_same_span():
    V, _ = np.linalg.qr(np.random.default_rng(4).standard_normal((50, 3)))
    assert span_residual(V, V @ ortho_group.rvs(3, random_state=1)) <= 1e-12

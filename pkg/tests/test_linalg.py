import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from twrelay import linalg
from conftest import crand


def frob_rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


# ---------------------------------------------------------------- svd

def test_svd_identity():
    u, s, v = linalg.svd(np.eye(2))
    assert np.allclose(s, [1, 1])
    assert np.allclose(np.abs(u), np.eye(2)) and np.allclose(np.abs(v), np.eye(2))


def test_svd_diagonal_with_zero():
    _, s, _ = linalg.svd(np.diag([3.0, 0.0]))
    assert np.allclose(s, [3, 0])


def test_svd_reconstruction_random(rng):
    a = crand(rng, 4, 2)
    u, s, v = linalg.svd(a, full_matrices=False)
    assert frob_rel(u @ np.diag(s) @ v.conj().T, a) < 1e-10
    assert np.all(np.diff(s) <= 0)
    assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-10)
    assert np.allclose(v.conj().T @ v, np.eye(2), atol=1e-10)


def test_svd_rejects_nonfinite():
    with pytest.raises(linalg.LinalgError):
        linalg.svd(np.array([[np.nan, 1.0]]))


def test_svd_deterministic(rng):
    a = crand(rng, 5, 3)
    r1, r2 = linalg.svd(a), linalg.svd(a)
    assert all(np.array_equal(x, y) for x, y in zip(r1, r2))


# ---------------------------------------------------------------- pinv

def test_pinv_diag():
    assert np.allclose(linalg.pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))


def test_pinv_identity():
    assert np.allclose(linalg.pinv(np.eye(3)), np.eye(3))


def test_pinv_left_inverse(rng):
    a = crand(rng, 4, 3)
    assert frob_rel(linalg.pinv(a) @ a, np.eye(3)) < 1e-9


def test_pinv_absolute_threshold():
    p = linalg.pinv(np.diag([2.0, 1e-3]), tol=1e-2)
    assert np.allclose(p, np.diag([0.5, 0.0]))


# ---------------------------------------------------------------- null space

def test_null_space_row():
    n = linalg.null_space(np.array([[1.0, 0.0]]))
    assert n.shape == (2, 1)
    assert np.isclose(abs(n[1, 0]), 1.0) and abs(n[0, 0]) < 1e-12


def test_null_space_identity_empty():
    assert linalg.null_space(np.eye(3)).shape == (3, 0)


def test_null_space_random_wide(rng):
    a = crand(rng, 2, 4)
    n = linalg.null_space(a)
    assert n.shape == (4, 2)
    assert np.linalg.norm(a @ n) < 1e-10
    assert np.allclose(n.conj().T @ n, np.eye(2), atol=1e-12)


def test_null_space_of_empty_map_is_everything():
    assert np.allclose(linalg.null_space(np.zeros((0, 3))), np.eye(3))


def test_rank_and_nullity():
    a = np.array([[1.0, 2.0], [2.0, 4.0]])
    assert linalg.rank(a) == 1 and linalg.nullity(a) == 1


# ---------------------------------------------------------------- hermitian sqrt

def test_sqrt_diag():
    assert np.allclose(linalg.hermitian_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


def test_sqrt_identity():
    assert np.allclose(linalg.hermitian_sqrt(np.eye(3)), np.eye(3))


def test_sqrt_random_psd(rng):
    m = crand(rng, 4, 3)
    p = m @ m.conj().T
    s = linalg.hermitian_sqrt(p)
    assert frob_rel(s @ s, p) < 1e-9
    assert np.allclose(s, s.conj().T)


def test_sqrt_rejects_indefinite():
    with pytest.raises(linalg.LinalgError):
        linalg.hermitian_sqrt(np.diag([1.0, -1.0]))


def test_sqrt_clamps_tiny_negative():
    s = linalg.hermitian_sqrt(np.diag([1.0, -1e-12]))
    assert np.allclose(s, np.diag([1.0, 0.0]))


# ---------------------------------------------------------------- kron / vec

def test_kron_identity_block_diagonal(rng):
    b = crand(rng, 2, 2)
    k = linalg.kron(np.eye(2), b)
    assert np.allclose(k[:2, :2], b) and np.allclose(k[2:, 2:], b)
    assert np.allclose(k[:2, 2:], 0) and np.allclose(k[2:, :2], 0)


def test_vec_column_order():
    a = np.array([[1, 3], [2, 4]])
    assert np.array_equal(linalg.vec(a)[:, 0], [1, 2, 3, 4])


def test_vec_kron_identity_fixed(rng):
    x, y, z = crand(rng, 2, 3), crand(rng, 3, 2), crand(rng, 2, 2)
    lhs = linalg.vec(x @ y @ z)
    rhs = linalg.kron(z.T, x) @ linalg.vec(y)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_unvec_roundtrip_exact(rng):
    a = crand(rng, 3, 5)
    assert np.array_equal(linalg.unvec(linalg.vec(a), 3, 5), a)


def test_unvec_shape_mismatch():
    with pytest.raises(linalg.LinalgError):
        linalg.unvec(np.zeros(5), 2, 3)


# ---------------------------------------------------------------- properties

dims = st.integers(min_value=1, max_value=8)


@st.composite
def cmatrices(draw, rows=dims, cols=dims):
    r, c = draw(rows), draw(cols)
    # entries on a 0.01 grid: no values whose squares underflow
    el = st.integers(-1000, 1000)
    re = draw(hnp.arrays(np.int64, (r, c), elements=el))
    im = draw(hnp.arrays(np.int64, (r, c), elements=el))
    return (re + 1j * im) / 100.0


@settings(max_examples=60, deadline=None)
@given(cmatrices())
def test_moore_penrose_conditions(a):
    p = linalg.pinv(a)
    scale = max(np.linalg.norm(a) * np.linalg.norm(p), 1.0)
    tol = 1e-9 * scale
    assert np.linalg.norm(a @ p @ a - a) <= tol * max(np.linalg.norm(a), 1e-300) + 1e-12
    assert np.linalg.norm(p @ a @ p - p) <= tol * max(np.linalg.norm(p), 1e-300) + 1e-12
    ap, pa = a @ p, p @ a
    assert np.linalg.norm(ap - ap.conj().T) <= tol + 1e-12
    assert np.linalg.norm(pa - pa.conj().T) <= tol + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_pinv_plus_null_projector_is_identity(m, extra, seed):
    a = crand(np.random.default_rng(seed), m, m + extra)  # full row rank
    n = linalg.null_space(a)
    lhs = linalg.pinv(a) @ a + n @ n.conj().T
    assert np.linalg.norm(lhs - np.eye(m + extra)) < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 6), st.integers(0, 2**32 - 1))
def test_sqrt_of_projector_is_itself(n, r, seed):
    r = min(r, n)
    q, _ = np.linalg.qr(crand(np.random.default_rng(seed), n, n))
    proj = q[:, :r] @ q[:, :r].conj().T
    assert np.linalg.norm(linalg.hermitian_sqrt(proj) - proj) < 1e-9


@settings(max_examples=50, deadline=None)
@given(dims, dims, dims, dims, st.integers(0, 2**32 - 1))
def test_vec_kron_identity_property(a, b, c, d, seed):
    rng = np.random.default_rng(seed)
    x, y, z = crand(rng, a, b), crand(rng, b, c), crand(rng, c, d)
    lhs = linalg.vec(x @ y @ z)
    rhs = linalg.kron(z.T, x) @ linalg.vec(y)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))


@settings(max_examples=40, deadline=None)
@given(cmatrices())
def test_null_space_residual_bound(a):
    n = linalg.null_space(a)
    s = np.linalg.svd(a, compute_uv=False)
    assert n.shape[1] == linalg.nullity(a)
    if n.shape[1]:
        assert np.allclose(n.conj().T @ n, np.eye(n.shape[1]), atol=1e-10)
        bound = linalg.rank_cutoff(s, a.shape) * np.sqrt(n.shape[1]) + 1e-12
        assert np.linalg.norm(a @ n) <= max(bound, 1e-10 * s[0])

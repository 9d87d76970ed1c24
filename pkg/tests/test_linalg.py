import json

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp
from scipy.integrate import quad_vec

from bcowlab.errors import DimensionError, SolverError, StructureError
from bcowlab.linalg import (DENSE_CAP, SINGULAR, as_sparse, condition_number, expm, integral_expm,
                            load_matrix, matrix_from_dict, matrix_to_dict, save_matrix,
                            solve_dense, solve_sparse, spectral_norm, validate_block_lower,
                            vector_from_dict)

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def complex_mats(n_max=5):
    return st.integers(1, n_max).flatmap(
        lambda n: st.tuples(hnp.arrays(float, (n, n), elements=finite),
                            hnp.arrays(float, (n, n), elements=finite)).map(lambda t: t[0] + 1j * t[1]))


@given(complex_mats())
def test_expm_agrees_with_scipy(M):
    ref = sla.expm(M)
    assert np.linalg.norm(expm(M) - ref) <= 1e-11 * max(1.0, np.linalg.norm(ref))


def test_expm_diagonal_and_zero():
    np.testing.assert_allclose(expm(np.diag([1.0, -2.0, 0.5j])), np.diag(np.exp([1.0, -2.0, 0.5j])),
                               rtol=1e-14)
    np.testing.assert_array_equal(expm(np.zeros((3, 3))), np.eye(3))


def test_expm_large_norm():
    M = np.array([[-40.0, 30.0], [0.0, -35.0]])
    np.testing.assert_allclose(expm(M), sla.expm(M), rtol=1e-9, atol=1e-25)


@given(complex_mats(4), st.floats(0.0, 2.0))
def test_integral_expm_identity(A, t):
    # int_0^t e^{As} ds A + I = e^{At}, also for singular A
    lhs = integral_expm(A, t) @ A + np.eye(A.shape[0])
    ref = sla.expm(A * t)
    assert np.linalg.norm(lhs - ref) <= 1e-10 * max(1.0, np.linalg.norm(ref))


def test_integral_expm_against_quadrature():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])  # nilpotent: singular
    t = 1.7
    ref, _ = quad_vec(lambda s: sla.expm(A * s), 0, t, epsabs=1e-13)
    np.testing.assert_allclose(integral_expm(A, t), ref, atol=1e-12)
    np.testing.assert_allclose(integral_expm(np.zeros((2, 2)), t), t * np.eye(2), atol=1e-14)


@given(complex_mats(6))
def test_spectral_norm_matches_numpy(M):
    assert spectral_norm(M) == pytest.approx(np.linalg.norm(M, 2), rel=1e-12, abs=1e-300)


def test_spectral_norm_sparse_paths():
    rng = np.random.default_rng(3)
    S = sp.random(300, 300, density=0.02, random_state=4) + sp.identity(300)
    assert spectral_norm(S) == pytest.approx(np.linalg.norm(S.toarray(), 2), rel=1e-12)
    n = DENSE_CAP + 100
    vals = rng.uniform(0.1, 1.0, n)
    vals[17] = 3.25
    big = sp.diags(vals).tocsr()
    assert spectral_norm(big) == pytest.approx(3.25, rel=1e-9)


def test_condition_number_and_sentinel():
    assert condition_number(np.diag([4.0, 2.0, 1.0])) == pytest.approx(4.0)
    assert condition_number(np.diag([1.0, 0.0])) == SINGULAR
    assert condition_number(np.diag([1.0, 1e-16])) == SINGULAR
    assert condition_number(np.eye(3)) == pytest.approx(1.0)


def test_solve_dense_and_singular(rng):
    M = rng.standard_normal((6, 6)) + 6 * np.eye(6)
    b = rng.standard_normal(6)
    np.testing.assert_allclose(M @ solve_dense(M, b), b, atol=1e-12)
    S = np.ones((3, 3))
    with pytest.raises(SolverError) as info:
        solve_dense(S, np.ones(3))
    assert info.value.sigma_min is not None and info.value.sigma_min < 1e-12
    with pytest.raises(DimensionError):
        solve_dense(M, np.ones(5))


def _block_lower(rng, nb, bs):
    S = np.eye(nb * bs, dtype=complex)
    for r in range(nb):
        for c in range(r):
            if rng.random() < 0.5:
                S[r * bs:(r + 1) * bs, c * bs:(c + 1) * bs] = rng.standard_normal((bs, bs))
    return sp.csr_matrix(S)


@given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_block_forward_matches_generic(nb, bs, seed):
    rng = np.random.default_rng(seed)
    S = _block_lower(rng, nb, bs)
    rhs = rng.standard_normal(nb * bs) + 1j * rng.standard_normal(nb * bs)
    x1 = solve_sparse(S, rhs, "block_forward", block_size=bs)
    x2 = solve_sparse(S, rhs, "generic")
    ref = np.linalg.solve(S.toarray(), rhs)
    assert np.linalg.norm(x1 - ref) <= 1e-9 * (1 + np.linalg.norm(ref))
    assert np.linalg.norm(x2 - ref) <= 1e-9 * (1 + np.linalg.norm(ref))


def test_validate_block_lower_names_offender():
    S = np.eye(4)
    S[0, 3] = 2.0
    with pytest.raises(StructureError, match=r"\(0, 3\)"):
        validate_block_lower(sp.csr_matrix(S), 2)
    S = np.eye(4)
    S[2, 2] = 2.0
    with pytest.raises(StructureError, match="identity"):
        validate_block_lower(sp.csr_matrix(S), 2)
    S = np.eye(4)
    S[1, 0] = 1.0  # inside a diagonal block
    with pytest.raises(StructureError):
        validate_block_lower(sp.csr_matrix(S), 2)
    with pytest.raises(DimensionError):
        validate_block_lower(sp.identity(5, format="csr"), 2)


def test_solve_sparse_unknown_method():
    with pytest.raises(ValueError):
        solve_sparse(sp.identity(2), np.ones(2), "magic")


def test_as_sparse_canonical():
    S = sp.coo_matrix(([1.0, 2.0, 0.0], ([0, 0, 1], [1, 1, 0])), shape=(2, 2))
    C = as_sparse(S)
    assert C.nnz == 1 and C[0, 1] == 3.0 and C.has_sorted_indices


@given(complex_mats(4))
def test_matrix_text_round_trip(M):
    assert np.array_equal(matrix_from_dict(json.loads(json.dumps(matrix_to_dict(M)))), M)


def test_matrix_text_rejects_mismatch(tmp_path):
    d = {"rows": 2, "cols": 2, "entries": [[1, 0], [2, 0], [3, 0]]}
    with pytest.raises(DimensionError):
        matrix_from_dict(d)
    with pytest.raises(ValueError):
        matrix_from_dict({"rows": 1, "cols": 1})
    with pytest.raises(DimensionError):
        vector_from_dict({"rows": 2, "cols": 2, "entries": [[1, 0]] * 4})
    save_matrix(tmp_path / "m.json", np.array([[1 + 2j, 3.0]]))
    np.testing.assert_array_equal(load_matrix(tmp_path / "m.json"), [[1 + 2j, 3.0]])


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        spectral_norm(np.array([[np.nan]]))

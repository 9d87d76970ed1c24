import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp
from scipy.integrate import solve_ivp

from bcowlab.errors import DimensionError, DomainError
from bcowlab.system import BCOWParams
from bcowlab.taylor import (ODEProblem, exact_solution, iterate_oracle, s_k, t_bk, t_k,
                            taylor_step)

from conftest import taylor_sum

small = st.floats(-1, 1, allow_nan=False)


def scaled_mats(n_max=4, radius=1.0):
    def build(n):
        return st.tuples(hnp.arrays(float, (n, n), elements=small),
                         hnp.arrays(float, (n, n), elements=small)).map(
            lambda t: _scale(t[0] + 1j * t[1], radius))
    return st.integers(1, n_max).flatmap(build)


def _scale(M, r):
    nrm = np.linalg.norm(M, 2)
    return M if nrm == 0 else M * (r / nrm)


@given(scaled_mats(), st.integers(0, 14))
def test_t_k_matches_power_sum(M, k):
    np.testing.assert_allclose(t_k(M, k), taylor_sum(M, k), atol=1e-13)


@given(scaled_mats(), st.integers(0, 10), st.integers(0, 10))
def test_t_bk_matches_power_sum(M, b, extra):
    k = b + extra
    np.testing.assert_allclose(t_bk(M, b, k), taylor_sum(M, k, start=b), atol=1e-13)


def test_t_k_scalar_partial_sums():
    z = 0.7
    for k in range(8):
        ref = sum(z**j / math.factorial(j) for j in range(k + 1))
        assert t_k(np.array([[z]]), k)[0, 0] == pytest.approx(ref, rel=1e-15)


def test_t_k_is_t_0k_bitwise(rng):
    M = rng.standard_normal((3, 3))
    assert np.array_equal(t_k(M, 7), t_bk(M, 0, 7))


def test_t_bk_top_index_is_identity():
    assert np.array_equal(t_bk(np.ones((2, 2)), 4, 4), np.eye(2))
    with pytest.raises(DomainError):
        t_bk(np.ones((2, 2)), 5, 4)
    with pytest.raises(DomainError):
        t_k(np.ones((2, 2)), -1)
    with pytest.raises(DomainError):
        s_k(np.ones((2, 2)), 0.1, 0)


@given(scaled_mats(), st.floats(0.05, 2.0), st.integers(1, 14))
def test_t_k_equals_s_k_a_plus_identity(A, h, k):
    Ah = A * h
    lhs = t_k(Ah, k) - s_k(Ah, h, k) @ A - np.eye(A.shape[0])
    assert np.abs(lhs).max() <= 1e-12


def test_s_k_scalar():
    a, h, k = -0.8, 0.5, 6
    ref = sum(a ** (j - 1) * h**j / math.factorial(j) for j in range(1, k + 1))
    assert s_k(np.array([[a * h]]), h, k)[0, 0] == pytest.approx(ref, rel=1e-14)


def test_iterate_oracle_scalar_recurrence():
    a, bb, x0, T, m, k = -0.9, 0.4, 1.3, 2.0, 4, 7
    h = T / m
    tk = sum((a * h) ** j / math.factorial(j) for j in range(k + 1))
    sk = sum(a ** (j - 1) * h**j / math.factorial(j) for j in range(1, k + 1))
    x = x0
    for _ in range(m):
        x = tk * x + sk * bb
    traj = iterate_oracle(ODEProblem([[a]], [bb], [x0], T), BCOWParams.from_steps(T, m, k))
    assert traj.final[0] == pytest.approx(x, rel=1e-14)
    assert traj.states.shape == (m + 1, 1) and traj.times[-1] == pytest.approx(T)


def test_iterate_oracle_rejects_inconsistent_steps():
    p = ODEProblem([[0.0]], [0.0], [1.0], 1.0)
    with pytest.raises(DomainError):
        iterate_oracle(p, BCOWParams(m=2, k=5, p=2, h=0.3, delta=0.1, Omega=10.0))


def test_taylor_step_linear():
    Tk, Sk = np.eye(2) * 2, np.eye(2) * 3
    np.testing.assert_array_equal(taylor_step(np.ones(2), Tk, Sk, np.ones(2)), [5, 5])


def test_exact_solution_against_ode_integrator(rng):
    A = rng.standard_normal((3, 3))
    b = rng.standard_normal(3)
    x0 = rng.standard_normal(3)
    p = ODEProblem(A, b, x0, 1.5)
    sol = solve_ivp(lambda t, x: A @ x + b, (0, 1.5), x0, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(exact_solution(p, 1.5).real, sol.y[:, -1], rtol=1e-9, atol=1e-10)
    np.testing.assert_array_equal(exact_solution(p, 0.0), x0)
    with pytest.raises(DomainError):
        exact_solution(p, 2.0)


def test_problem_validation():
    with pytest.raises(DimensionError):
        ODEProblem(np.eye(2), [1.0], [1.0, 2.0], 1.0)
    with pytest.raises(DimensionError):
        ODEProblem(np.ones((2, 3)), [1.0, 1.0], [1.0, 2.0], 1.0)
    with pytest.raises(DomainError):
        ODEProblem(np.eye(1), [1.0], [1.0], 0.0)
    p = ODEProblem([[1]], [0], [1], 2)
    assert p.N == 1 and p.A.dtype == complex and isinstance(p.T, float)


@given(scaled_mats(3), st.integers(1, 6), st.integers(6, 14))
def test_oracle_converges_to_exact(A, m, k):
    # truncation error shrinks like 1/(k+1)! for ||Ah|| <= 1
    n = A.shape[0]
    p = ODEProblem(A, np.ones(n), np.ones(n), float(m))
    err = np.linalg.norm(iterate_oracle(p, BCOWParams.from_steps(p.T, m, k)).final - exact_solution(p, p.T))
    scale = np.linalg.norm(exact_solution(p, p.T)) + p.T * math.e**2 * np.sqrt(n)
    assert err <= 2 * m * math.e**3 / math.factorial(k + 1) * scale + 1e-12

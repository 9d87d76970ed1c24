"""Truncated Taylor propagators and the step-by-step reference recursion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .linalg import as_square, as_vector, expm, integral_expm


@dataclass(frozen=True)
class ODEProblem:
    """Constant-coefficient problem ``x' = A x + b`` on ``[0, T]``."""

    A: np.ndarray
    b: np.ndarray
    x_in: np.ndarray
    T: float

    def __post_init__(self):
        A = as_square(self.A)
        b = as_vector(self.b)
        x_in = as_vector(self.x_in)
        n = A.shape[0]
        if b.shape[0] != n or x_in.shape[0] != n:
            raise DimensionError(
                f"A is {n}x{n} but b has {b.shape[0]} and x_in has {x_in.shape[0]} entries"
            )
        if not self.T > 0:
            raise DomainError(f"T must be positive, got {self.T}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "x_in", x_in)
        object.__setattr__(self, "T", float(self.T))

    @property
    def N(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray    # (m+1,)
    states: np.ndarray   # (m+1, N)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def t_bk(M, b: int, k: int) -> np.ndarray:
    """``sum_{j=b}^{k} b! M^(j-b) / j!`` evaluated by Horner's rule."""
    M = as_square(M)
    if b < 0 or k < b:
        raise DomainError(f"need 0 <= b <= k, got b={b}, k={k}")
    eye = np.eye(M.shape[0], dtype=complex)
    P = eye.copy()
    for i in range(k - b, 0, -1):
        P = eye + (M @ P) / (b + i)
    return P


def t_k(M, k: int) -> np.ndarray:
    """Degree-k Taylor polynomial of the exponential at the scaled matrix ``M = A h``."""
    if k < 0:
        raise DomainError(f"k must be non-negative, got {k}")
    return t_bk(M, 0, k)


def s_k(M, h: float, k: int) -> np.ndarray:
    """``sum_{j=1}^{k} M^(j-1) h / j!`` with ``M = A h``."""
    if k < 1:
        raise DomainError(f"s_k needs k >= 1, got {k}")
    return h * t_bk(M, 1, k)


def taylor_step(x, Tk, Sk, b) -> np.ndarray:
    return Tk @ x + Sk @ b


def iterate_oracle(problem: ODEProblem, params) -> Trajectory:
    """Apply ``x <- T_k x + S_k b`` for ``params.m`` steps of size ``params.h``."""
    m, k, h = params.m, params.k, params.h
    if abs(m * h - problem.T) > 1e-12 * problem.T:
        raise DomainError(f"m*h = {m * h} does not match T = {problem.T}")
    Ah = problem.A * h
    Tk = t_k(Ah, k)
    Sk = s_k(Ah, h, k) if k >= 1 else np.zeros_like(Ah)
    states = np.empty((m + 1, problem.N), dtype=complex)
    states[0] = problem.x_in
    for i in range(m):
        states[i + 1] = taylor_step(states[i], Tk, Sk, problem.b)
    return Trajectory(times=h * np.arange(m + 1), states=states)


def exact_solution(problem: ODEProblem, t: float) -> np.ndarray:
    """``exp(A t) x_in + int_0^t exp(A s) ds b`` for ``t`` in ``[0, T]``."""
    if not 0.0 <= t <= problem.T * (1 + 1e-14):
        raise DomainError(f"t = {t} outside [0, {problem.T}]")
    if t == 0.0:
        return problem.x_in.copy()
    return expm(problem.A * t) @ problem.x_in + integral_expm(problem.A, t) @ problem.b

"""Assembly and classical solution of the block linear system ``C X = F``.

The unknown ``X`` stacks the blocks ``x_{i,j}`` with flat index
``g = i(k+1) + j``: for ``0 <= i < m`` the ``j``-range is ``0..k`` (the Taylor
terms of step ``i``), and the final ``i = m`` block row holds ``x_{m,0}``
followed by ``p`` copies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateStateError, DimensionError, DomainError
from .linalg import DENSE_CAP, as_sparse, condition_number, solve_sparse, spectral_norm
from .taylor import ODEProblem, iterate_oracle

E = math.e
MIN_TRUNCATION = 5


@dataclass(frozen=True)
class BCOWParams:
    m: int
    k: int
    p: int
    h: float
    delta: float
    Omega: float

    def __post_init__(self):
        if self.m < 1 or self.k < 0 or self.p < 0:
            raise DomainError(f"invalid (m, k, p) = ({self.m}, {self.k}, {self.p})")
        if not (self.h > 0 and self.delta > 0):
            raise DomainError("h and delta must be positive")

    @property
    def d(self) -> int:
        return self.m * (self.k + 1) + self.p

    @property
    def T(self) -> float:
        return self.m * self.h

    @classmethod
    def from_steps(cls, T: float, m: int, k: int, p: int | None = None,
                   delta: float = 0.1, Omega: float | None = None) -> "BCOWParams":
        p = m if p is None else p
        if Omega is None:
            Omega = 2 * m * E**3 / delta
        return cls(m=m, k=k, p=p, h=T / m, delta=delta, Omega=Omega)


def log_factorial(n: int) -> float:
    return math.lgamma(n + 1)


def truncation_order(Omega: float) -> int:
    """Smallest admissible k: start from ceil(2 ln W / ln ln W), then raise
    until k >= 5 and (k+1)! >= W (compared in log space)."""
    if Omega <= E or math.log(math.log(Omega)) <= 1.0:
        k = MIN_TRUNCATION
    else:
        L = math.log(Omega)
        k = max(MIN_TRUNCATION, math.ceil(2 * L / math.log(L)))
    log_omega = math.log(Omega) if Omega > 0 else -math.inf
    while log_factorial(k + 1) < log_omega:
        k += 1
    return k


def select_parameters(T: float, normA: float, epsilon: float, g_est: float = 1.0,
                      norm_b: float = 0.0, norm_xT: float | None = None) -> BCOWParams:
    """Step size, step count, padding and truncation order for target precision ``epsilon``."""
    if not 0 < epsilon < 0.5:
        raise DomainError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if not T > 0:
        raise DomainError(f"T must be positive, got {T}")
    if g_est < 1:
        raise DomainError(f"g_est must be >= 1, got {g_est}")
    if normA == 0:
        m = 1
    else:
        m = math.ceil(T * normA)
    h = T / m
    delta = epsilon / (25 * math.sqrt(m) * g_est)
    if norm_b > 0:
        if not norm_xT:
            raise DomainError("norm_xT is required when b is nonzero")
        beta = 1 + T * E**2 * norm_b / norm_xT
    else:
        beta = 1.0
    Omega = 2 * m * E**3 / delta * beta
    k = truncation_order(Omega)
    return BCOWParams(m=m, k=k, p=m, h=h, delta=delta, Omega=Omega)


def select_for_problem(problem: ODEProblem, epsilon: float, g_est: float | None = None,
                       norm_xT: float | None = None, coarse_k: int = 8) -> BCOWParams:
    """``select_parameters`` with ``||x(T)||`` and ``g`` estimated from a coarse
    run of the Taylor recursion when they are not supplied."""
    normA = spectral_norm(problem.A)
    if norm_xT is None or g_est is None:
        m = max(1, math.ceil(problem.T * normA))
        coarse = iterate_oracle(problem, BCOWParams.from_steps(problem.T, m, coarse_k))
        norms = coarse.norms()
        if norm_xT is None:
            norm_xT = float(norms[-1])
        if g_est is None:
            g_est = float(norms.max() / norms[-1]) if norms[-1] > 0 else 1.0
    return select_parameters(problem.T, normA, epsilon, g_est=max(1.0, g_est),
                             norm_b=float(np.linalg.norm(problem.b)), norm_xT=norm_xT)


@dataclass(frozen=True)
class SparseBlockSystem:
    C: sp.csr_matrix
    F: np.ndarray
    N: int
    params: BCOWParams
    problem: ODEProblem = field(repr=False)

    @property
    def n_blocks(self) -> int:
        return self.params.d + 1

    def index(self, i: int, j: int) -> int:
        m, k, p = self.params.m, self.params.k, self.params.p
        if 0 <= i < m and 0 <= j <= k or i == m and 0 <= j <= p:
            return i * (k + 1) + j
        raise IndexError(f"no block ({i}, {j})")

    def position(self, g: int) -> tuple[int, int]:
        m, k, p = self.params.m, self.params.k, self.params.p
        if not 0 <= g <= self.params.d:
            raise IndexError(f"block index {g} out of range")
        if g < m * (k + 1):
            return divmod(g, k + 1)
        return m, g - m * (k + 1)

    def blocks(self, X) -> np.ndarray:
        return np.asarray(X).reshape(self.n_blocks, self.N)

    def dense(self) -> np.ndarray:
        return self.C.toarray()


def build_system(problem: ODEProblem, params: BCOWParams) -> SparseBlockSystem:
    m, k, p, h = params.m, params.k, params.p, params.h
    if abs(m * h - problem.T) > 1e-12 * problem.T:
        raise DimensionError(f"m*h = {m * h} does not match T = {problem.T}")
    if k < 1:
        raise DomainError("the block system needs k >= 1")
    N, d = problem.N, params.d
    nb = d + 1
    Ah = sp.csr_matrix(problem.A * h)
    eye_n = sp.identity(N, dtype=complex, format="csr")

    C = sp.identity(nb * N, dtype=complex, format="csr")
    starts = np.arange(m) * (k + 1)
    for j in range(1, k + 1):
        pat = sp.csr_matrix((np.ones(m), (starts + j, starts + j - 1)), shape=(nb, nb))
        C = C - sp.kron(pat, Ah / j, format="csr")
    rows = np.repeat((np.arange(m) + 1) * (k + 1), k + 1)
    cols = (starts[:, None] + np.arange(k + 1)[None, :]).ravel()
    tail = np.arange(d - p + 1, d + 1)
    rows = np.concatenate([rows, tail])
    cols = np.concatenate([cols, tail - 1])
    copy = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(nb, nb))
    C = as_sparse(C - sp.kron(copy, eye_n, format="csr"))

    F = np.zeros(nb * N, dtype=complex)
    F[:N] = problem.x_in
    for i in range(m):
        g = i * (k + 1) + 1
        F[g * N:(g + 1) * N] += h * problem.b
    return SparseBlockSystem(C=C, F=F, N=N, params=params, problem=problem)


@dataclass(frozen=True)
class SolveReport:
    X: np.ndarray
    x_final: np.ndarray
    success_probability: float
    g_measured: float
    oracle_deviation: float
    tail_deviation: float
    step_norms: np.ndarray = field(repr=False)


def solve_bcow(system: SparseBlockSystem, method: str = "block_forward", rtol=None) -> SolveReport:
    X = solve_sparse(system.C, system.F, method=method, block_size=system.N, rtol=rtol)
    pr = system.params
    blocks = system.blocks(X)
    g_last = pr.m * (pr.k + 1)
    x_final = blocks[g_last].copy()
    nfin = np.linalg.norm(x_final)
    nX2 = float(np.vdot(X, X).real)
    prob = (pr.p + 1) * nfin**2 / nX2 if nX2 > 0 else 0.0
    step_norms = np.linalg.norm(blocks[np.arange(pr.m + 1) * (pr.k + 1)], axis=1)
    g_measured = float(step_norms.max() / nfin) if nfin > 0 else math.inf
    tail = blocks[g_last + 1:]
    tail_dev = float(np.abs(tail - x_final).max()) if tail.size else 0.0
    ref = iterate_oracle(system.problem, pr).final
    nref = np.linalg.norm(ref)
    dev = np.linalg.norm(x_final - ref)
    dev = float(dev / nref) if nref > 0 else float(dev)
    return SolveReport(X=X, x_final=x_final, success_probability=float(prob),
                       g_measured=g_measured, oracle_deviation=dev,
                       tail_deviation=tail_dev, step_norms=step_norms)


def state_distance(x, y) -> float:
    """``|| x/||x|| - y/||y|| ||``."""
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise DegenerateStateError("cannot normalise a zero vector")
    return float(np.linalg.norm(x / nx - y / ny))


def measurement_emulation(report: SolveReport, exact_xT) -> tuple[float, float]:
    """Deterministic stand-in for measuring the final register: the distance
    between normalised states, and the post-selection probability."""
    return state_distance(report.x_final, exact_xT), report.success_probability


@dataclass(frozen=True)
class QueryFigure:
    leading: float
    log_factor: float

    @property
    def total(self) -> float:
        return self.leading * self.log_factor


def query_complexity_figure(params: BCOWParams | None, C_A: float, sparsity: int, T: float,
                            normA: float, g: float, beta: float, epsilon: float) -> QueryFigure:
    """Leading factor ``C_A s T ||A||`` and ``log(C_A s T ||A|| g beta / eps)``.

    Reported only; nothing downstream branches on these numbers. A zero leading
    factor (``A = 0``) gives a log factor of ``-inf``.
    """
    leading = C_A * sparsity * T * normA
    arg = leading * g * beta / epsilon
    return QueryFigure(leading=leading, log_factor=math.log(arg) if arg > 0 else -math.inf)


def empirical_kappa(system: SparseBlockSystem):
    """Condition number of ``C`` if it is small enough to densify, else ``None``."""
    if system.C.shape[0] > DENSE_CAP:
        return None
    return condition_number(system.dense())

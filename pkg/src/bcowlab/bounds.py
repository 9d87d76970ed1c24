"""Empirical checks of the error, norm, power and condition-number bounds.

Every check returns a ``Check`` with status ``pass``, ``fail``,
``not applicable`` (a hypothesis of the bound does not hold) or ``skipped``
(too large to measure). A check passes iff ``measured <= bound * (1 + 1e-9)``.
"""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.special import i0

from .linalg import DENSE_CAP, as_square, expm, integral_expm, spectral_norm
from .system import (BCOWParams, SparseBlockSystem, build_system, log_factorial,
                     solve_bcow, state_distance)
from .taylor import ODEProblem, exact_solution, s_k, t_k

E = math.e
PASS, FAIL, NA, SKIP = "pass", "fail", "not applicable", "skipped"
NON_DIAGONALIZABLE = "non-diagonalizable"

BOUND_RTOL = 1e-9
# inflation of the sampled sup in C(A) so grid under-sampling never fails a true bound
SUP_INFLATION = 1.02
# sum_j (1/j!)^2 = I_0(2)
I0_2 = float(i0(2.0))
HYPOTHESIS_RTOL = 1e-12
COLUMN_CAP = 2048


@dataclass(frozen=True)
class Check:
    name: str
    status: str
    measured: float = math.nan
    bound: float = math.nan
    reason: str = ""

    @property
    def failed(self) -> bool:
        return self.status == FAIL

    @property
    def slack(self) -> float:
        return self.bound / self.measured if self.measured > 0 else math.inf


def _compare(name, measured, bound, reason=""):
    ok = measured <= bound * (1 + BOUND_RTOL)
    return Check(name, PASS if ok else FAIL, float(measured), float(bound), reason)


# -- hypotheses ----------------------------------------------------------------

def beta_factor(problem: ODEProblem) -> float:
    """``1 + T e^2 ||b|| / ||x(T)||`` using the exact final state."""
    nb = np.linalg.norm(problem.b)
    if nb == 0:
        return 1.0
    nx = np.linalg.norm(exact_solution(problem, problem.T))
    return math.inf if nx == 0 else 1 + problem.T * E**2 * nb / nx


def truncation_hypothesis_holds(m: int, k: int, delta: float, beta: float) -> bool:
    """``(k+1)! >= 2 m e^3 beta / delta`` checked in log space."""
    if not math.isfinite(beta):
        return False
    rhs = math.log(2 * m) + 3 + math.log(beta) - math.log(delta)
    return log_factorial(k + 1) >= rhs - HYPOTHESIS_RTOL * abs(rhs)


def implied_delta(m: int, k: int, beta: float = 1.0) -> float:
    """Smallest delta for which (k+1)! satisfies the truncation hypothesis."""
    return math.exp(math.log(2 * m) + 3 + math.log(beta) - log_factorial(k + 1))


def params_for(problem: ODEProblem, m: int, k: int, p: int | None = None) -> BCOWParams:
    """Params with step count and truncation chosen by hand and delta set to
    the tightest value the truncation hypothesis allows."""
    beta = beta_factor(problem)
    delta = implied_delta(m, k, beta if math.isfinite(beta) else 1.0)
    return BCOWParams.from_steps(problem.T, m, k, p, delta=delta,
                                 Omega=2 * m * E**3 * beta / delta)


def step_norm(A, h: float) -> float:
    return spectral_norm(np.asarray(A) * h)


def _small_step(A, h):
    return step_norm(A, h) <= 1 + HYPOTHESIS_RTOL


# -- conditioning parameters ----------------------------------------------------

def c_of_a(A, T: float, n_samples: int = 256) -> float:
    """``sup_{t in [0,T]} ||exp(A t)||`` on a uniform grid plus one local refinement."""
    A = as_square(A)
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    ts = np.linspace(0.0, T, n_samples)
    vals = np.array([spectral_norm(expm(A * t)) for t in ts])
    i = int(np.argmax(vals))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, n_samples - 1)]
    best = vals[i]
    if hi > lo:
        fine = np.linspace(lo, hi, 33)[1:-1]
        best = max(best, max(spectral_norm(expm(A * t)) for t in fine))
    return float(best)


def kappa_v(A):
    """``||V|| ||V^-1||`` for unit-column eigenvectors, or ``NON_DIAGONALIZABLE``."""
    A = as_square(A)
    _, V = np.linalg.eig(A)
    s = sla.svdvals(V)
    if s[-1] < 1e-12 * s[0]:
        return NON_DIAGONALIZABLE
    return float(s[0] / s[-1])


# -- individual bounds -----------------------------------------------------------

def verify_norm_bound(system: SparseBlockSystem) -> Check:
    pr = system.params
    bound = 2 * math.sqrt(pr.k)
    if pr.k < 5:
        return Check("norm_C", NA, bound=bound, reason="k < 5")
    if not _small_step(system.problem.A, pr.h):
        return Check("norm_C", NA, bound=bound, reason="||Ah|| > 1")
    return _compare("norm_C", spectral_norm(system.C), bound)


def _conditioning_applicable(system, delta):
    pr = system.params
    if pr.k < 5:
        return "k < 5"
    if not _small_step(system.problem.A, pr.h):
        return "||Ah|| > 1"
    # C depends on A only, so the b-dependent factor beta is taken as 1
    if not truncation_hypothesis_holds(pr.m, pr.k, delta, 1.0):
        return "truncation hypothesis (k+1)! >= 2me^3/delta fails"
    return ""


def verify_kappa_bound(system: SparseBlockSystem, C_A: float,
                       delta: float | None = None) -> tuple[Check, Check]:
    """Condition number of C and the intermediate bound on ``||C^-1||``."""
    pr = system.params
    delta = pr.delta if delta is None else delta
    ca = C_A * SUP_INFLATION * (1 + delta)
    bk = 9 * pr.k * (pr.m + pr.p) * ca
    bi = 4.5 * math.sqrt(pr.k) * (pr.m + pr.p) * ca
    why = _conditioning_applicable(system, delta)
    if why:
        return Check("kappa_C", NA, bound=bk, reason=why), Check("inv_norm_C", NA, bound=bi, reason=why)
    if system.C.shape[0] > DENSE_CAP:
        why = f"dimension {system.C.shape[0]} > {DENSE_CAP}"
        return Check("kappa_C", SKIP, bound=bk, reason=why), Check("inv_norm_C", SKIP, bound=bi, reason=why)
    s = sla.svdvals(system.dense())
    return _compare("kappa_C", s[0] / s[-1], bk), _compare("inv_norm_C", 1 / s[-1], bi)


def inverse_columns(system: SparseBlockSystem) -> np.ndarray:
    """Dense ``C^-1`` by unit lower-triangular substitution."""
    n = system.C.shape[0]
    return sla.solve_triangular(system.dense(), np.eye(n, dtype=complex), lower=True,
                                unit_diagonal=True)


def verify_inverse_column_bounds(system: SparseBlockSystem, C_A: float,
                                 delta: float | None = None) -> list[Check]:
    """Per-column bounds on ``||C^-1 e||^2`` for every canonical basis vector ``e``.

    Columns in the Taylor rows (``g < m(k+1)``) are compared with
    ``I0(2) (C_A (1+delta) e)^2 (m+p)``; columns in the copy rows must give
    exactly ``p - b + 1`` where ``b`` is the offset inside the copy chain.
    """
    pr = system.params
    delta = pr.delta if delta is None else delta
    why = _conditioning_applicable(system, delta)
    if why:
        return [Check("inverse_columns", NA, reason=why)]
    if system.C.shape[0] > COLUMN_CAP:
        return [Check("inverse_columns", SKIP, reason=f"dimension {system.C.shape[0]} > {COLUMN_CAP}")]
    Y = inverse_columns(system)
    sq = np.sum(np.abs(Y) ** 2, axis=0).reshape(pr.d + 1, system.N)
    d1 = pr.m * (pr.k + 1)
    case1 = I0_2 * (C_A * SUP_INFLATION * (1 + delta) * E) ** 2 * (pr.m + pr.p)
    checks = []
    for g in range(pr.d + 1):
        for n in range(system.N):
            val = sq[g, n]
            if g < d1:
                checks.append(_compare(f"case1[g={g},n={n}]", val, case1))
            else:
                b = g - d1
                exact = pr.p - b + 1
                ok = abs(val - exact) <= 1e-12 * (pr.p + 1) and val <= (pr.p + 1) * (1 + BOUND_RTOL)
                checks.append(Check(f"case2[g={g},n={n}]", PASS if ok else FAIL, float(val),
                                    float(pr.p + 1), f"expected exactly {exact}"))
    return checks


def power_norms(A, params: BCOWParams) -> np.ndarray:
    Tk = t_k(np.asarray(A) * params.h, params.k)
    P = np.eye(Tk.shape[0], dtype=complex)
    out = []
    for _ in range(params.m):
        P = Tk @ P
        out.append(spectral_norm(P))
    return np.array(out)


def verify_power_bound(A, params: BCOWParams, C_A: float, delta: float | None = None) -> Check:
    """``max_l ||T_k(Ah)^l|| <= C_A (1+delta)`` over ``l = 1..m``."""
    delta = params.delta if delta is None else delta
    bound = C_A * SUP_INFLATION * (1 + delta)
    if not _small_step(A, params.h):
        return Check("power", NA, bound=bound, reason="||Ah|| > 1")
    if not truncation_hypothesis_holds(params.m, params.k, delta, 1.0):
        return Check("power", NA, bound=bound, reason="truncation hypothesis fails")
    return _compare("power", power_norms(A, params).max(), bound)


def verify_solution_error(problem: ODEProblem, params: BCOWParams,
                          method: str = "block_forward") -> Check:
    if not _small_step(problem.A, params.h):
        return Check("solution_error", NA, bound=params.delta, reason="||Ah|| > 1")
    if not truncation_hypothesis_holds(params.m, params.k, params.delta, beta_factor(problem)):
        return Check("solution_error", NA, bound=params.delta, reason="truncation hypothesis fails")
    xT = exact_solution(problem, problem.T)
    rep = solve_bcow(build_system(problem, params), method)
    return _compare("solution_error", state_distance(xT, rep.x_final), params.delta)


@dataclass(frozen=True)
class ErrorDecomposition:
    I1_norm: float
    I1_bound: float
    I2_norm: float
    I2_bound: float
    status: str = PASS
    reason: str = ""

    def checks(self) -> list[Check]:
        if self.status == NA:
            return [Check("I1", NA, reason=self.reason), Check("I2", NA, reason=self.reason)]
        return [_compare("I1", self.I1_norm, self.I1_bound), _compare("I2", self.I2_norm, self.I2_bound)]


def error_decomposition(problem: ODEProblem, params: BCOWParams) -> ErrorDecomposition:
    """Split the final-time error into the homogeneous part ``I1`` and the source part ``I2``.

    ``I1 = (T^m - T_k^m) exp(-A T) x(T)`` and
    ``I2 = sum_{j<m} (T^j S - T_k^j S_k) b`` with ``T = exp(Ah)``,
    ``S = int_0^h exp(As) ds``.
    """
    m, k, h = params.m, params.k, params.h
    c = m * E**2 / math.exp(log_factorial(k + 1))
    if c > 1:
        return ErrorDecomposition(math.nan, math.nan, math.nan, math.nan, NA, "m e^2/(k+1)! > 1")
    if not _small_step(problem.A, h):
        return ErrorDecomposition(math.nan, math.nan, math.nan, math.nan, NA, "||Ah|| > 1")
    A, b = problem.A, problem.b
    Ah = A * h
    Th, Sh = expm(Ah), integral_expm(A, h)
    Tk, Sk = t_k(Ah, k), s_k(Ah, h, k)
    xT = exact_solution(problem, problem.T)
    I1 = (np.linalg.matrix_power(Th, m) - np.linalg.matrix_power(Tk, m)) @ (expm(-A * problem.T) @ xT)
    I2 = np.zeros(problem.N, dtype=complex)
    Pj, Qj = np.eye(problem.N, dtype=complex), np.eye(problem.N, dtype=complex)
    for _ in range(m):
        I2 += (Pj @ Sh - Qj @ Sk) @ b
        Pj, Qj = Th @ Pj, Tk @ Qj
    fact = math.exp(log_factorial(k + 1))
    return ErrorDecomposition(
        I1_norm=float(np.linalg.norm(I1)),
        I1_bound=m * E**3 / fact * float(np.linalg.norm(xT)),
        I2_norm=float(np.linalg.norm(I2)),
        I2_bound=problem.T * m * E**5 / fact * float(np.linalg.norm(b)),
    )


def check_constants(J_max: int = 50, mp_max: int = 50, k_range=(5, 30), b_k_max: int = 30) -> list[Check]:
    """Numerical constants used in the condition-number argument."""
    checks = []
    partial = np.cumsum([1.0 / math.factorial(j) ** 2 for j in range(J_max + 1)])
    # later terms drop below machine epsilon, so ask for non-decreasing
    monotone = bool(np.all(np.diff(partial) >= 0))
    checks.append(_compare("I0(2) partial sums < 2.28", partial.max(), 2.28))
    checks.append(Check("I0(2) partial sums monotone", PASS if monotone else FAIL))
    worst = 0.0
    for m in range(1, mp_max + 1):
        for p in range(1, mp_max + 1):
            for k in range(k_range[0], k_range[1] + 1):
                lhs = (m * (k + 1) + p + 1) * (m + p)
                worst = max(worst, lhs / (1.2 * k * (m + p) ** 2))
    checks.append(_compare("(m(k+1)+p+1)(m+p) <= 6/5 k (m+p)^2", worst, 1.0))
    # exact rationals: a partial sum of I0(2) two terms longer is a strict
    # lower bound for I0(2) that floats would round away
    lower = sum(Fraction(1, math.factorial(j) ** 2) for j in range(b_k_max + 2))
    worst_b = Fraction(0)
    for k in range(b_k_max + 1):
        for b in range(k + 1):
            s = sum(Fraction(math.factorial(b), math.factorial(j)) ** 2 for j in range(b, k + 1))
            worst_b = max(worst_b, s)
    checks.append(Check("sum_j (b!/j!)^2 < I0(2)", PASS if worst_b < lower else FAIL,
                        float(worst_b), I0_2))
    return checks


# -- combined report ----------------------------------------------------------------

@dataclass
class BoundsReport:
    C_A: float
    kappa_V: object
    norm_C: float
    bound_norm_C: float
    kappa_empirical: float
    bound_kappa: float
    inv_norm_empirical: float
    bound_inv_norm: float
    power_norms: np.ndarray
    I1_norm: float
    I1_bound: float
    I2_norm: float
    I2_bound: float
    checks: list[Check] = field(default_factory=list)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.failed]

    @property
    def pass_all(self) -> bool:
        return not self.failures


def bounds_report(problem: ODEProblem, params: BCOWParams, n_samples: int = 256,
                  columns: bool = True) -> BoundsReport:
    C_A = c_of_a(problem.A, problem.T, n_samples)
    system = build_system(problem, params)
    cn = verify_norm_bound(system)
    ck, ci = verify_kappa_bound(system, C_A)
    cp = verify_power_bound(problem.A, params, C_A)
    dec = error_decomposition(problem, params)
    checks = [cn, ck, ci, cp, verify_solution_error(problem, params), *dec.checks()]
    if columns:
        cols = verify_inverse_column_bounds(system, C_A)
        worst = max(cols, key=lambda c: (c.failed, c.measured / c.bound if c.bound else 0))
        checks.append(Check("inverse_columns", FAIL if any(c.failed for c in cols) else worst.status,
                            worst.measured, worst.bound, worst.reason or worst.name))
    norm_C = cn.measured if cn.status != NA else spectral_norm(system.C)
    return BoundsReport(
        C_A=C_A, kappa_V=kappa_v(problem.A),
        norm_C=norm_C, bound_norm_C=cn.bound,
        kappa_empirical=ck.measured, bound_kappa=ck.bound,
        inv_norm_empirical=ci.measured, bound_inv_norm=ci.bound,
        power_norms=power_norms(problem.A, params),
        I1_norm=dec.I1_norm, I1_bound=dec.I1_bound, I2_norm=dec.I2_norm, I2_bound=dec.I2_bound,
        checks=checks,
    )

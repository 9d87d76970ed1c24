"""Time-dependent problems through enlargement and dilation.

``x' = A(t) x + b(t)`` is first made homogeneous, ``u' = B(t) u`` with
``u = [x; r]``, then made autonomous by adding a periodic variable ``s``:
``w' = (-i P_s (x) I + sum_l |l><l| (x) B(s_l)) w`` with initial data
``G(s_l) u(0)``. The envelope is transported with unit speed, so the block
at ``s = T`` holds ``u(T)`` at the final time.

Geometry: the periodic ``s``-domain is ``[T - W, T + W]`` and the envelope is
``G(s / sigma)`` with ``sigma = W - T``. Both defaults keep the envelope
away from the periodic seam for the whole run, which is what makes the
retrieval converge spectrally in ``N_s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson

from .bounds import c_of_a
from .errors import DomainError
from .linalg import as_sparse, spectral_norm
from .registry import TimeODEProblem
from .system import BCOWParams, SolveReport, build_system, select_for_problem, solve_bcow
from .taylor import ODEProblem, exact_solution

MIN_HALF_WIDTH = 8.0


def average_b_squared(p: TimeODEProblem, n_quad: int = 256) -> np.ndarray:
    """``(1/T) int_0^T |b_i(t)|^2 dt`` by composite Simpson."""
    if n_quad < 4 or n_quad % 2:
        raise DomainError(f"n_quad must be even and >= 4, got {n_quad}")
    ts = np.linspace(0.0, p.T, n_quad + 1)
    vals = np.abs(np.array([p.b(t) for t in ts])) ** 2
    return simpson(vals, x=ts, axis=0) / p.T


@dataclass(frozen=True)
class EnlargedSystem:
    problem: TimeODEProblem = field(repr=False)
    r: np.ndarray
    eps_reg: float
    b_ave_sq: np.ndarray
    u_in: np.ndarray

    @property
    def b_ave_norm(self) -> float:
        return float(np.sqrt(self.b_ave_sq.sum()))

    def f(self, t: float) -> np.ndarray:
        return self.problem.b(t) / self.r

    def B_of(self, t: float) -> np.ndarray:
        N = self.problem.N
        B = np.zeros((2 * N, 2 * N), dtype=complex)
        B[:N, :N] = self.problem.A(t)
        B[:N, N:] = np.diag(self.f(t))
        return B


def build_enlarged(p: TimeODEProblem, n_quad: int = 256) -> EnlargedSystem:
    eps_reg = 1.0 / math.sqrt(p.N)
    bsq = average_b_squared(p, n_quad)
    r = np.sqrt(bsq + eps_reg**2).astype(complex)
    return EnlargedSystem(problem=p, r=r, eps_reg=eps_reg, b_ave_sq=bsq,
                          u_in=np.concatenate([p.x_in, r]))


def success_probability_enlarged(x_norm: float, b_ave_norm: float) -> float:
    if x_norm < 0 or b_ave_norm < 0:
        raise DomainError("norms must be non-negative")
    if math.isinf(x_norm):
        return 1.0
    return x_norm**2 / (x_norm**2 + b_ave_norm**2 + 1.0)


def mollifier(s):
    """``e * exp(1/(s^2 - 1))`` on ``|s| < 1``, zero elsewhere."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.e * np.exp(1.0 / (s[inside] ** 2 - 1.0))
    return out if out.ndim else float(out)


def _check_nodes(N_s):
    if N_s < 4 or N_s % 2 or N_s & (N_s - 1):
        raise DomainError(f"N_s must be an even power of two >= 4, got {N_s}")


def momentum_symbols(N_s: int, half_width: float = 1.0) -> np.ndarray:
    return np.pi / half_width * (np.arange(N_s) - N_s / 2)


def build_momentum(N_s: int, half_width: float = 1.0) -> np.ndarray:
    """Spectral first-derivative symbol on a periodic grid of length ``2 * half_width``.

    ``P = E diag(mu) E^H / N_s`` with ``E[j, l] = exp(i mu_l (s_j - s_0))``, so
    grid samples of ``exp(i mu_l (s - s_0))`` are eigenvectors with eigenvalue
    ``mu_l`` and ``-i P`` acts as ``-d/ds``.
    """
    _check_nodes(N_s)
    mu = momentum_symbols(N_s, half_width)
    offsets = np.arange(N_s) * (2.0 * half_width / N_s)
    E = np.exp(1j * np.outer(offsets, mu))
    P = (E * mu) @ E.conj().T / N_s
    return 0.5 * (P + P.conj().T)


def dilation_geometry(T: float, half_width: float | None = None,
                      envelope_width: float | None = None) -> tuple[float, float]:
    W = max(MIN_HALF_WIDTH, 2.0 * T) if half_width is None else float(half_width)
    sigma = W - T if envelope_width is None else float(envelope_width)
    if W <= T:
        raise DomainError(f"half width {W} must exceed T = {T}")
    if not 0 < sigma <= W - T:
        raise DomainError(f"envelope width {sigma} must lie in (0, {W - T}]")
    return W, sigma


def s_grid(T: float, N_s: int, half_width: float) -> np.ndarray:
    s = T - half_width + np.arange(N_s) * (2.0 * half_width / N_s)
    s[N_s // 2] = T
    return s


@dataclass(frozen=True)
class DilatedSystem:
    N_s: int
    s_grid: np.ndarray
    P_s: np.ndarray
    A_bar: sp.csr_matrix
    w_in: np.ndarray
    mu: np.ndarray
    half_width: float
    envelope_width: float
    enlarged: EnlargedSystem = field(repr=False)

    @property
    def l_star(self) -> int:
        return self.N_s // 2

    @property
    def block(self) -> int:
        return 2 * self.enlarged.problem.N

    def envelope(self, s) -> np.ndarray:
        return mollifier(np.asarray(s) / self.envelope_width)

    def node_block(self, w, l: int) -> np.ndarray:
        return np.asarray(w)[l * self.block:(l + 1) * self.block]


def build_dilated(p: TimeODEProblem, N_s: int, half_width: float | None = None,
                  envelope_width: float | None = None, enlarged: EnlargedSystem | None = None
                  ) -> DilatedSystem:
    W, sigma = dilation_geometry(p.T, half_width, envelope_width)
    P = build_momentum(N_s, W)
    enl = build_enlarged(p) if enlarged is None else enlarged
    s = s_grid(p.T, N_s, W)
    blocks = []
    for sl in s:
        try:
            blocks.append(enl.B_of(sl))
        except Exception as exc:
            raise DomainError(f"coefficients cannot be evaluated at s_l = {sl!r}: {exc}") from exc
    n = 2 * p.N
    A_bar = as_sparse(-1j * sp.kron(P, sp.identity(n), format="csr") + sp.block_diag(blocks))
    w_in = np.kron(mollifier(s / sigma), enl.u_in)
    return DilatedSystem(N_s=N_s, s_grid=s, P_s=P, A_bar=A_bar, w_in=w_in,
                         mu=momentum_symbols(N_s, W), half_width=W, envelope_width=sigma,
                         enlarged=enl)


def default_num_nodes(delta: float) -> int:
    """Smallest power of two that is at least ``4 ceil(log2(1/delta))``."""
    target = max(4, 4 * math.ceil(math.log2(1.0 / delta)))
    return 1 << (target - 1).bit_length()


@dataclass(frozen=True)
class TimeDependentReport:
    x_final: np.ndarray
    u_final: np.ndarray
    success_probability: float
    params: BCOWParams
    N_s: int
    bcow: SolveReport = field(repr=False)
    dilated: DilatedSystem = field(repr=False)


def dilated_problem(dil: DilatedSystem, T: float) -> ODEProblem:
    n = dil.A_bar.shape[0]
    return ODEProblem(dil.A_bar.toarray(), np.zeros(n), dil.w_in, T)


def solve_time_dependent(p: TimeODEProblem, epsilon: float = 1e-6, N_s: int | None = None,
                         method: str = "block_forward", half_width: float | None = None,
                         envelope_width: float | None = None) -> TimeDependentReport:
    """Enlarge, dilate, run the block solver on ``w' = A_bar w`` and read ``x(T)``
    from the node at ``s = T``."""
    if not 0 < epsilon < 0.5:
        raise DomainError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if N_s is None:
        N_s = default_num_nodes(epsilon / 25)
    dil = build_dilated(p, N_s, half_width, envelope_width)
    prob = dilated_problem(dil, p.T)
    params = select_for_problem(prob, epsilon)
    rep = solve_bcow(build_system(prob, params), method)
    g0 = float(dil.envelope(0.0))
    u = dil.node_block(rep.x_final, dil.l_star) / g0
    x = u[:p.N].copy()
    wmax = float(rep.step_norms.max())
    prob_succ = float(np.linalg.norm(x) ** 2 / wmax**2) if wmax > 0 else 0.0
    return TimeDependentReport(x_final=x, u_final=u, success_probability=prob_succ,
                               params=params, N_s=N_s, bcow=rep, dilated=dil)


# -- classical references ------------------------------------------------------------

def reference_time_dependent(p: TimeODEProblem, n_steps: int = 1024) -> np.ndarray:
    """Classical RK4 with ``n_steps`` fixed steps on the original system."""
    if n_steps < 16:
        raise DomainError(f"n_steps must be >= 16, got {n_steps}")
    h = p.T / n_steps
    x = p.x_in.astype(complex).copy()
    for i in range(n_steps):
        t = i * h
        k1 = p.rhs(t, x)
        k2 = p.rhs(t + h / 2, x + h / 2 * k1)
        k3 = p.rhs(t + h / 2, x + h / 2 * k2)
        k4 = p.rhs(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def certified_reference(p: TimeODEProblem, n_steps: int = 1024) -> tuple[np.ndarray, float]:
    """RK4 at ``2n`` steps and a Richardson error estimate ``|x_2n - x_n| / 15``."""
    coarse = reference_time_dependent(p, n_steps)
    fine = reference_time_dependent(p, 2 * n_steps)
    return fine, float(np.linalg.norm(fine - coarse) / 15)


def per_node_trajectories(p: TimeODEProblem, N_s: int, times=None, half_width: float | None = None,
                          envelope_width: float | None = None) -> np.ndarray:
    """Frozen-coefficient solutions ``x^(l)(t)``, shape ``(N_s, len(times), N)``.

    Node ``l`` evolves ``x' = A(s_l) x + b(s_l)`` from ``G(s_l) x_in``.
    """
    _check_nodes(N_s)
    W, sigma = dilation_geometry(p.T, half_width, envelope_width)
    times = np.linspace(0.0, p.T, 33) if times is None else np.asarray(times, dtype=float)
    s = s_grid(p.T, N_s, W)
    out = np.empty((N_s, times.size, p.N), dtype=complex)
    for l, sl in enumerate(s):
        node = ODEProblem(p.A(sl), p.b(sl), mollifier(sl / sigma) * p.x_in, p.T)
        for j, t in enumerate(times):
            out[l, j] = exact_solution(node, min(float(t), p.T))
    return out


@dataclass(frozen=True)
class TDComplexity:
    C_A: float
    normA_m: float
    b_ave_norm: float
    g: float
    sparsity: int
    leading: float


def td_complexity_report(p: TimeODEProblem, N_s: int, params: BCOWParams | None = None,
                         half_width: float | None = None) -> TDComplexity:
    """Grid-evaluated cost parameters of the dilated solver; reported only."""
    dil = build_dilated(p, N_s, half_width)
    enl = dil.enlarged
    s = dil.s_grid
    C_A = max(c_of_a(p.A(sl), p.T, 64) for sl in s)
    fmax = max(float(np.abs(enl.f(sl)).max()) for sl in s)
    normA_m = 1 + max(spectral_norm(p.A(sl)) for sl in s) + fmax
    times = None if params is None else params.h * np.arange(params.m + 1)
    traj = per_node_trajectories(p, N_s, times, dil.half_width, dil.envelope_width)
    xmax = float(np.linalg.norm(traj, axis=2).max())
    xT = p.exact(p.T) if p.exact is not None else certified_reference(p)[0]
    nxT = float(np.linalg.norm(xT))
    fnorm = max(float(np.linalg.norm(enl.f(sl))) for sl in s)
    g = (xmax + enl.b_ave_norm + 1) / nxT * (1 + p.T * fnorm) if nxT > 0 else math.inf
    sparsity = int(np.diff(dil.A_bar.indptr).max())
    return TDComplexity(C_A=C_A, normA_m=normA_m, b_ave_norm=enl.b_ave_norm, g=g,
                        sparsity=sparsity, leading=sparsity * C_A * normA_m * p.T)

"""Named non-autonomous test problems ``x' = A(t) x + b(t)``.

Coefficients are given by analytic formulas valid on the whole real line,
since the dilated generator samples them outside ``[0, T]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, DomainError
from .linalg import as_square, as_vector
from .taylor import ODEProblem, exact_solution


@dataclass(frozen=True)
class TimeODEProblem:
    N: int
    A_of: Callable[[float], np.ndarray]
    b_of: Callable[[float], np.ndarray]
    x_in: np.ndarray
    T: float
    registry_name: str = "custom"
    exact: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        x_in = as_vector(self.x_in)
        if x_in.shape[0] != self.N:
            raise DimensionError(f"x_in has {x_in.shape[0]} entries, expected {self.N}")
        if not self.T > 0:
            raise DomainError(f"T must be positive, got {self.T}")
        object.__setattr__(self, "x_in", x_in)
        object.__setattr__(self, "T", float(self.T))

    def A(self, t: float) -> np.ndarray:
        A = as_square(self.A_of(float(t)))
        if A.shape[0] != self.N:
            raise DimensionError(f"A({t}) is {A.shape}, expected {self.N}x{self.N}")
        return A

    def b(self, t: float) -> np.ndarray:
        b = as_vector(self.b_of(float(t)))
        if b.shape[0] != self.N:
            raise DimensionError(f"b({t}) has {b.shape[0]} entries, expected {self.N}")
        return b

    def rhs(self, t: float, x) -> np.ndarray:
        return self.A(t) @ x + self.b(t)


def _const(value):
    value = np.asarray(value, dtype=complex)
    return lambda t: value


def cosine_drive(T: float = 1.0) -> TimeODEProblem:
    """Scalar ``x' = cos(t) x + sin(t)``, ``x(0) = 1``."""
    return TimeODEProblem(1, lambda t: np.array([[np.cos(t)]]), lambda t: np.array([np.sin(t)]),
                          np.array([1.0]), T, "cosine_drive")


def cosine_scalar(T: float = 1.0) -> TimeODEProblem:
    """Scalar ``x' = cos(t) x`` with solution ``exp(sin t)``."""
    return TimeODEProblem(1, lambda t: np.array([[np.cos(t)]]), _const([0.0]),
                          np.array([1.0]), T, "cosine_scalar",
                          exact=lambda t: np.array([np.exp(np.sin(t))], dtype=complex))


FROZEN_A = np.array([[-0.6, 0.4], [-0.2, -0.3]])
FROZEN_B = np.array([0.3, -0.1])
FROZEN_X = np.array([1.0, 0.5])


def frozen_const(T: float = 1.0) -> TimeODEProblem:
    """Constant coefficients, for comparison with the time-independent solver."""
    prob = ODEProblem(FROZEN_A, FROZEN_B, FROZEN_X, T)
    return TimeODEProblem(2, _const(FROZEN_A), _const(FROZEN_B), FROZEN_X, T, "frozen_const",
                          exact=lambda t: exact_solution(prob, t))


def rotating_2x2(T: float = 1.0) -> TimeODEProblem:
    """``A(t) = w(t) J`` with ``J`` the rotation generator and ``w = 1 + sin(t)/2``."""
    J = np.array([[0.0, -1.0], [1.0, 0.0]])

    def exact(t):
        th = t + 0.5 * (1 - np.cos(t))
        return np.array([np.cos(th), np.sin(th)], dtype=complex)

    return TimeODEProblem(2, lambda t: (1 + 0.5 * np.sin(t)) * J, _const([0.0, 0.0]),
                          np.array([1.0, 0.0]), T, "rotating_2x2", exact=exact)


def zero_dynamics(T: float = 1.0) -> TimeODEProblem:
    """``A = 0``, ``b = 0``: the state never moves."""
    return TimeODEProblem(2, _const(np.zeros((2, 2))), _const([0.0, 0.0]),
                          np.array([0.6, 0.8]), T, "zero_dynamics",
                          exact=lambda t: np.array([0.6, 0.8], dtype=complex))


REGISTRY = {
    "cosine_drive": cosine_drive,
    "cosine_scalar": cosine_scalar,
    "frozen_const": frozen_const,
    "rotating_2x2": rotating_2x2,
    "zero_dynamics": zero_dynamics,
}


def get_problem(name: str, T: float | None = None) -> TimeODEProblem:
    try:
        make = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; known: {', '.join(REGISTRY)}") from None
    return make() if T is None else make(T)

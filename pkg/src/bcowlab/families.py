"""Named matrix families used in bound-verification campaigns.

A family spec is written ``name:key=value,key=value``; list-valued parameters
use ``|`` as separator, e.g. ``diagonal:spectrum=-1|-2|-40``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("random_diagonalizable", "jordan_block", "non_normal_2x2", "random_sparse", "diagonal")


@dataclass(frozen=True)
class MatrixFamilySpec:
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown matrix family {self.family!r}; known: {', '.join(FAMILIES)}")

    @classmethod
    def parse(cls, text: str) -> "MatrixFamilySpec":
        name, _, rest = text.strip().partition(":")
        params = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, eq, val = item.partition("=")
            if not eq:
                raise ValueError(f"family parameter {item!r} is not key=value")
            params[key.strip()] = _parse_value(val.strip())
        return cls(name.strip(), params)

    def with_params(self, **overrides) -> "MatrixFamilySpec":
        return MatrixFamilySpec(self.family, {**self.params, **overrides})

    def __str__(self):
        def fmt(v):
            return "|".join(map(str, v)) if isinstance(v, (list, tuple)) else str(v)
        body = ",".join(f"{k}={fmt(v)}" for k, v in self.params.items())
        return f"{self.family}:{body}" if body else self.family

    @property
    def randomized(self) -> bool:
        return self.family in ("random_diagonalizable", "random_sparse")

    def generate(self, rng: np.random.Generator | None = None) -> np.ndarray:
        p = self.params
        if "seed" in p or rng is None:
            rng = np.random.default_rng(int(p.get("seed", 0)))
        if self.family == "jordan_block":
            return jordan_block(int(p.get("N", 2)), complex(p.get("eigenvalue", -1.0)))
        if self.family == "non_normal_2x2":
            return non_normal_2x2(float(p.get("K", 5.0)), float(p.get("gap", 0.0)))
        if self.family == "diagonal":
            spec = p.get("spectrum", [-1.0])
            spec = spec if isinstance(spec, (list, tuple)) else [spec]
            if "N" in p and int(p["N"]) != len(spec):
                raise ValueError(f"N={p['N']} but spectrum has {len(spec)} entries")
            return np.diag(np.asarray(spec, dtype=complex))
        if self.family == "random_sparse":
            return random_sparse(int(p.get("N", 4)), int(p.get("s", 2)), rng)
        return random_diagonalizable(int(p.get("N", 4)), float(p.get("target_kappa_V", 10.0)), rng)


def _parse_value(val: str):
    if "|" in val:
        return [_parse_value(v) for v in val.split("|")]
    for cast in (int, float, complex):
        try:
            return cast(val)
        except ValueError:
            pass
    return val


def jordan_block(N: int, eigenvalue: complex = -1.0) -> np.ndarray:
    return eigenvalue * np.eye(N, dtype=complex) + np.eye(N, k=1, dtype=complex)


def non_normal_2x2(K: float, gap: float = 0.0) -> np.ndarray:
    """``[[-1, K], [0, -1-gap]]``: defective for ``gap = 0``, ill-conditioned
    eigenvectors for small ``gap``."""
    return np.array([[-1.0, K], [0.0, -1.0 - gap]], dtype=complex)


def _random_unitary(N, rng):
    Z = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_diagonalizable(N: int, target_kappa_V: float, rng) -> np.ndarray:
    """``A = V D V^-1`` with unit-norm eigenvector columns and cond(V) = target.

    Two eigenvectors are tilted towards each other; with unit columns
    ``cond([v1 v2]) = sqrt((1+c)/(1-c))`` where ``c = <v1, v2>``, so ``c`` is
    chosen from the target directly. Eigenvalues are distinct with negative
    real parts.
    """
    if N < 2:
        raise ValueError("random_diagonalizable needs N >= 2")
    if target_kappa_V < 1:
        raise ValueError("target_kappa_V must be >= 1")
    kap2 = target_kappa_V**2
    c = (kap2 - 1) / (kap2 + 1)
    V = np.eye(N, dtype=complex)
    V[:, 1] = [c, np.sqrt(1 - c * c)] + [0] * (N - 2)
    V = _random_unitary(N, rng) @ V
    re = -np.sort(rng.uniform(0.1, 1.0, N))
    im = rng.uniform(-1.0, 1.0, N)
    lam = re + 1j * im + 0.05j * np.arange(N)
    return V @ np.diag(lam) @ np.linalg.inv(V)


def random_sparse(N: int, s: int, rng) -> np.ndarray:
    s = min(max(1, s), N)
    A = np.zeros((N, N), dtype=complex)
    for i in range(N):
        cols = rng.choice(N, size=s, replace=False)
        A[i, cols] = (rng.standard_normal(s) + 1j * rng.standard_normal(s)) / np.sqrt(2 * s)
    return A

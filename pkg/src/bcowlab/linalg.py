"""Dense and sparse complex linear-algebra primitives.

Dense matrices are plain ``complex128`` numpy arrays, sparse matrices are
``scipy.sparse.csr_matrix``. Everything here is a pure function of its inputs.
"""
from __future__ import annotations

import json
import math
import warnings
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionError, SolverError, StructureError

SINGULAR = "singular"

# largest dimension that is densified for SVD / direct solves
DENSE_CAP = 4096
RESIDUAL_RTOL = 1e-10
SINGULAR_RTOL = 1e-14

_EXPM_THETA = 0.5
_EXPM_DEGREE = 18


def as_matrix(M) -> np.ndarray:
    """Coerce to a finite 2-D complex array."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {M.shape}")
    if M.size == 0:
        raise DimensionError("empty matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.ndim == 2 and 1 in v.shape:
        v = v.ravel()
    if v.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def as_square(M) -> np.ndarray:
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"matrix must be square, got {M.shape}")
    return M


def as_sparse(S) -> sp.csr_matrix:
    """CSR copy with sorted indices, merged duplicates and no stored zeros."""
    S = sp.csr_matrix(S, dtype=complex)
    S.sum_duplicates()
    S.eliminate_zeros()
    S.sort_indices()
    return S


def spectral_norm(M) -> float:
    """Largest singular value. Sparse inputs above ``DENSE_CAP`` use ARPACK."""
    if sp.issparse(M):
        if min(M.shape) == 0:
            raise DimensionError("empty matrix")
        if max(M.shape) <= DENSE_CAP:
            return spectral_norm(M.toarray())
        if M.nnz == 0:
            return 0.0
        s = spla.svds(M.tocsc(), k=1, which="LM", tol=0, return_singular_vectors=False)
        return float(s[0])
    M = as_matrix(M)
    return float(sla.svdvals(M)[0])


def condition_number(M):
    """sigma_max / sigma_min from a full SVD, or ``SINGULAR``."""
    if sp.issparse(M):
        M = M.toarray()
    M = as_square(M)
    s = sla.svdvals(M)
    if s[-1] < SINGULAR_RTOL * s[0] or s[0] == 0.0:
        return SINGULAR
    return float(s[0] / s[-1])


def _norm2_upper(M) -> float:
    # sqrt(||M||_1 ||M||_inf) >= ||M||_2, cheap for large operands
    if sp.issparse(M):
        one = abs(M).sum(axis=0).max()
        inf = abs(M).sum(axis=1).max()
    else:
        one = np.abs(M).sum(axis=0).max()
        inf = np.abs(M).sum(axis=1).max()
    return math.sqrt(float(one) * float(inf))


def check_residual(M, x, rhs, rtol=None) -> float:
    """Relative residual; raises ``SolverError`` when the contract is violated."""
    rtol = RESIDUAL_RTOL if rtol is None else rtol
    if not np.all(np.isfinite(x)):
        raise SolverError("solution has non-finite entries")
    res = np.linalg.norm(M @ x - rhs)
    scale = _norm2_upper(M) * np.linalg.norm(x) + np.linalg.norm(rhs)
    if res > rtol * scale:
        raise SolverError(f"residual {res:.3e} exceeds {rtol:.1e} * {scale:.3e}")
    return float(res / scale) if scale > 0 else 0.0


def solve_dense(M, rhs, rtol=None) -> np.ndarray:
    """Partial-pivoting LU solve with a residual check on the result."""
    M = as_square(M)
    rhs = as_vector(rhs)
    if rhs.shape[0] != M.shape[0]:
        raise DimensionError(f"rhs length {rhs.shape[0]} != {M.shape[0]}")
    try:
        with warnings.catch_warnings():
            # exact zero pivots are reported below as SolverError
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(M, check_finite=False)
        udiag = np.abs(np.diag(lu))
        if udiag.min() <= SINGULAR_RTOL * udiag.max():
            raise np.linalg.LinAlgError("zero pivot")
        x = sla.lu_solve((lu, piv), rhs, check_finite=False)
        check_residual(M, x, rhs, rtol)
    except (np.linalg.LinAlgError, SolverError, ValueError) as exc:
        smin = float(sla.svdvals(M)[-1])
        raise SolverError(f"dense solve failed: {exc}", sigma_min=smin) from exc
    return x


def validate_block_lower(S, block_size: int) -> None:
    """Require block lower-triangular structure with identity diagonal blocks."""
    n = S.shape[0]
    if S.shape[0] != S.shape[1]:
        raise DimensionError(f"matrix must be square, got {S.shape}")
    if block_size <= 0 or n % block_size:
        raise DimensionError(f"dimension {n} is not a multiple of block size {block_size}")
    coo = S.tocoo()
    rb = coo.row // block_size
    cb = coo.col // block_size
    upper = np.flatnonzero(cb > rb)
    if upper.size:
        i = upper[0]
        raise StructureError(
            f"entry ({coo.row[i]}, {coo.col[i]}) = {coo.data[i]} lies above the block diagonal"
        )
    diag_block = cb == rb
    bad = np.flatnonzero(diag_block & ((coo.row != coo.col) | (coo.data != 1)))
    if bad.size:
        i = bad[0]
        raise StructureError(
            f"entry ({coo.row[i]}, {coo.col[i]}) = {coo.data[i]} breaks the identity diagonal block"
        )
    ndiag = np.count_nonzero(diag_block)
    if ndiag != n:
        have = np.zeros(n, dtype=bool)
        have[coo.row[diag_block]] = True
        r = int(np.flatnonzero(~have)[0])
        raise StructureError(f"diagonal entry ({r}, {r}) is missing")


def _block_forward(S, rhs, block_size):
    n = S.shape[0]
    x = np.zeros(n, dtype=complex)
    indptr = S.indptr
    for start in range(0, n, block_size):
        stop = start + block_size
        lo, hi = indptr[start], indptr[stop]
        rows = S[start:stop] if hi > lo else None
        # x[start:stop] is still zero, so the identity block contributes nothing
        x[start:stop] = rhs[start:stop] if rows is None else rhs[start:stop] - rows @ x
    return x


def solve_sparse(S, rhs, method: str = "block_forward", block_size: int | None = None,
                 rtol=None) -> np.ndarray:
    """Solve ``S x = rhs``.

    ``block_forward`` does one forward sweep over row blocks and needs
    ``block_size``; ``generic`` densifies up to ``DENSE_CAP`` and falls back to
    a sparse direct solve above it.
    """
    S = as_sparse(S)
    rhs = as_vector(rhs)
    if S.shape[0] != S.shape[1]:
        raise DimensionError(f"matrix must be square, got {S.shape}")
    if rhs.shape[0] != S.shape[0]:
        raise DimensionError(f"rhs length {rhs.shape[0]} != {S.shape[0]}")
    if method == "block_forward":
        if block_size is None:
            raise ValueError("block_forward needs block_size")
        validate_block_lower(S, block_size)
        x = _block_forward(S, rhs, block_size)
    elif method == "generic":
        if S.shape[0] <= DENSE_CAP:
            return solve_dense(S.toarray(), rhs, rtol=rtol)
        x = spla.spsolve(S.tocsc(), rhs)
    else:
        raise ValueError(f"unknown method {method!r}")
    try:
        check_residual(S, x, rhs, rtol)
    except SolverError as exc:
        smin = float(sla.svdvals(S.toarray())[-1]) if S.shape[0] <= DENSE_CAP else None
        raise SolverError(str(exc), sigma_min=smin) from exc
    return x


def expm(M) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a truncated Taylor series.

    The matrix is scaled by 2**-s until its 1-norm is at most 0.5, where a
    degree-18 Taylor polynomial is accurate to roughly 1e-23, then squared
    back s times.
    """
    M = as_square(M)
    n = M.shape[0]
    norm1 = np.abs(M).sum(axis=0).max()
    s = 0 if norm1 <= _EXPM_THETA else int(math.ceil(math.log2(norm1 / _EXPM_THETA)))
    X = M / (2.0 ** s)
    eye = np.eye(n, dtype=complex)
    E = eye.copy()
    for j in range(_EXPM_DEGREE, 0, -1):
        E = eye + (X @ E) / j
    for _ in range(s):
        E = E @ E
    return E


def integral_expm(A, t: float) -> np.ndarray:
    """``int_0^t exp(A s) ds`` via the top-right block of an augmented exponential.

    Valid for singular ``A``.
    """
    A = as_square(A)
    if t < 0:
        raise ValueError("t must be non-negative")
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n), dtype=complex)
    aug[:n, :n] = A
    aug[:n, n:] = np.eye(n)
    return expm(aug * t)[:n, n:]


# -- text format: {"rows": r, "cols": c, "entries": [[re, im], ...]} row-major

def matrix_to_dict(M) -> dict:
    M = np.asarray(M, dtype=complex)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    return {
        "rows": int(M.shape[0]),
        "cols": int(M.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in M.ravel()],
    }


def matrix_from_dict(d: dict) -> np.ndarray:
    try:
        rows, cols, entries = int(d["rows"]), int(d["cols"]), d["entries"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"matrix record needs rows, cols and entries: {exc}") from exc
    if rows <= 0 or cols <= 0:
        raise DimensionError(f"non-positive dimensions {rows}x{cols}")
    if len(entries) != rows * cols:
        raise DimensionError(f"{len(entries)} entries for a {rows}x{cols} matrix")
    vals = []
    for e in entries:
        if isinstance(e, (int, float)):
            vals.append(complex(e))
        elif len(e) == 2:
            vals.append(complex(float(e[0]), float(e[1])))
        else:
            raise ValueError(f"entry {e!r} is not a [re, im] pair")
    return as_matrix(np.array(vals, dtype=complex).reshape(rows, cols))


def vector_from_dict(d: dict) -> np.ndarray:
    M = matrix_from_dict(d)
    if 1 not in M.shape:
        raise DimensionError(f"expected a vector, got {M.shape}")
    return M.ravel()


def save_matrix(path, M) -> None:
    Path(path).write_text(json.dumps(matrix_to_dict(M)))


def load_matrix(path) -> np.ndarray:
    return matrix_from_dict(json.loads(Path(path).read_text()))

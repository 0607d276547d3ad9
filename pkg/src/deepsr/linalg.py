"""Dense matrix primitives shared by the rest of the pipeline.

Matrices are plain 2-D float64 numpy arrays. Every public operation
validates shapes and finiteness up front; violations raise InputError
rather than propagating NaNs. solve_spd is Cholesky-backed (LAPACK
dpotrf/dpotrs) with one step of iterative refinement.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from .errors import InputError, NumericalError


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return `a` as a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise InputError(f"{name}: expected a 2-D array, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name}: contains non-finite entries")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product a @ b with dimension validation."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise InputError(
            f"matmul: inner dimensions differ ({a.shape[1]} vs {b.shape[0]})"
        )
    return a @ b


def solve_spd(a, b) -> np.ndarray:
    """Solve a @ Z = b for symmetric positive definite `a`.

    Raises NumericalError naming the failing pivot if `a` is not SPD.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[0] != a.shape[1]:
        raise InputError(f"solve_spd: a must be square, got {a.shape}")
    if a.shape[0] != b.shape[0]:
        raise InputError(
            f"solve_spd: row mismatch (a has {a.shape[0]}, b has {b.shape[0]})"
        )
    if a.size:
        scale = np.abs(a).max()
        if scale > 0 and np.abs(a - a.T).max() > 1e-8 * scale:
            raise InputError("solve_spd: a is not symmetric")
    c, info = lapack.dpotrf(a, lower=1)
    if info > 0:
        raise NumericalError(
            f"solve_spd: matrix not positive definite (pivot {info} <= 0)"
        )
    if info < 0:
        raise NumericalError(f"solve_spd: illegal argument {-info} to dpotrf")
    z, info = lapack.dpotrs(c, b, lower=1)
    if info != 0:
        raise NumericalError(f"solve_spd: dpotrs failed with info={info}")
    # One refinement step keeps the residual well under the 1e-8 contract.
    r = b - a @ z
    dz, info = lapack.dpotrs(c, r, lower=1)
    if info == 0:
        z = z + dz
    return z


def frobenius_norm(a) -> float:
    """Square root of the sum of squared entries."""
    a = as_matrix(a, "a")
    return float(np.linalg.norm(a, "fro"))


def l1_norm(v) -> float:
    """Sum of absolute values of all entries."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise InputError("l1_norm: contains non-finite entries")
    return float(np.abs(v).sum())

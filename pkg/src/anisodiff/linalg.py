"""Dense symmetric linear-algebra kernels.

``sym_eig`` and ``spd_solve`` are thin deterministic wrappers over LAPACK
(via numpy/scipy) with validation and a fixed eigenvector sign convention.
``expm_oracle`` is a self-contained scaling-and-squaring matrix exponential
kept independent of the eigensolver so it can serve as a test oracle for
the spectral diffusion path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import (
    ConvergenceFailureError,
    DimensionTooLargeError,
    NotPositiveDefiniteError,
    NotSymmetricError,
)

SYMMETRY_RTOL = 1e-12
EXPM_MAX_DIM = 32


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues ascending.

    Column ``i`` of ``eigenvectors`` pairs with ``eigenvalues[i]``; each
    column is sign-fixed so its largest-magnitude entry is positive (ties
    broken by lowest index).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _require_symmetric(m: np.ndarray, op: str) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise NotSymmetricError(f"{op}: expected a square matrix, got shape {m.shape}")
    scale = np.max(np.abs(m)) if m.size else 0.0
    asym = np.max(np.abs(m - m.T)) if m.size else 0.0
    if asym > SYMMETRY_RTOL * max(scale, 1e-300):
        raise NotSymmetricError(f"{op}: matrix asymmetry {asym:.3e} exceeds tolerance")
    return m


def fix_column_signs(v: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive.

    Ties in magnitude resolve to the lowest index. Entries within a 1e-9
    relative band of the maximum count as tied, so symmetric eigenvectors
    whose exact-arithmetic tie is split by rounding still resolve the same
    way on every platform.
    """
    v = np.array(v, dtype=np.float64)
    for c in range(v.shape[1]):
        mags = np.abs(v[:, c])
        peak = mags.max()
        lead = int(np.argmax(mags >= peak * (1.0 - 1e-9)))
        if v[lead, c] < 0:
            v[:, c] = -v[:, c]
    return v


def sym_eig(m) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric real matrix.

    Raises ``NotSymmetricError`` on asymmetric input and
    ``ConvergenceFailureError`` if LAPACK fails to converge.
    """
    m = _require_symmetric(m, "sym_eig")
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailureError(str(exc)) from exc
    return EigenDecomposition(eigenvalues=w, eigenvectors=fix_column_signs(v))


def spd_solve(m, rhs) -> np.ndarray:
    """Solve m @ y = rhs for symmetric positive-definite m via Cholesky.

    ``rhs`` may be a vector or a matrix of stacked right-hand sides.
    """
    m = _require_symmetric(m, "spd_solve")
    rhs = np.asarray(rhs, dtype=np.float64)
    try:
        factor = cho_factor(m, lower=True)
    except LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    return cho_solve(factor, rhs)


def spd_factor(m):
    """Cholesky factor reusable across several ``spd_apply`` solves."""
    m = _require_symmetric(m, "spd_factor")
    try:
        return cho_factor(m, lower=True)
    except LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc


def spd_apply(factor, rhs) -> np.ndarray:
    return cho_solve(factor, np.asarray(rhs, dtype=np.float64))


def expm_oracle(m) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a truncated Taylor series.

    Desk-scale test oracle only: dimension capped at 32. Accuracy target is
    1e-10 absolute entry error for inf-norms up to ~50.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionTooLargeError(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n > EXPM_MAX_DIM:
        raise DimensionTooLargeError(f"dimension {n} exceeds oracle cap {EXPM_MAX_DIM}")

    norm = np.max(np.abs(m).sum(axis=1)) if m.size else 0.0
    squarings = 0
    while norm / (2.0 ** squarings) > 0.5:
        squarings += 1
    a = m / (2.0 ** squarings)

    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 40):
        term = term @ a / k
        result = result + term
        if np.max(np.abs(term)) < 1e-18:
            break

    for _ in range(squarings):
        result = result @ result
    return result

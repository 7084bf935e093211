"""Direct sparse solver for symmetric positive definite systems."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a matrix handed to :func:`factorize` is not positive definite."""


class Factorization:
    """Reusable factorization of a sparse SPD matrix.

    SuperLU runs in symmetric mode with diagonal pivoting only, so the
    factorization is ``P A P^T = L U`` with ``U = D L^T``; ``A`` is positive
    definite exactly when every pivot ``diag(U)`` is positive.
    """

    def __init__(self, lu, n: int):
        self._lu = lu
        self.n = n

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {self.n}")
        if not np.any(b):
            return np.zeros_like(b)
        return self._lu.solve(b)


def symmetric_from_lower(A) -> sp.csc_matrix:
    """Rebuild a symmetric matrix from its lower triangle (the upper one is ignored)."""
    lower = sp.tril(sp.csc_matrix(A), format="csc")
    return (lower + sp.tril(lower, k=-1, format="csc").T).tocsc()


def factorize(A) -> Factorization:
    """Factorize the SPD matrix ``A``, reading only its lower triangle."""
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    n = A.shape[0]
    S = symmetric_from_lower(A)
    S.sort_indices()
    try:
        lu = splu(
            S,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:  # exactly singular
        raise NotPositiveDefinite(str(exc)) from exc
    pivots = lu.U.diagonal()
    if not np.array_equal(lu.perm_r, lu.perm_c) or not np.all(pivots > 0):
        raise NotPositiveDefinite(
            f"matrix is not positive definite (smallest pivot {pivots.min():.3e})"
        )
    return Factorization(lu, n)


def solve(F: Factorization, b: np.ndarray) -> np.ndarray:
    return F.solve(b)


def spd_solve(A, b: np.ndarray) -> np.ndarray:
    """One-shot ``A x = b`` for SPD ``A``."""
    return factorize(A).solve(b)

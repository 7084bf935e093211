"""Strictly convex quadratic programs with simple bounds.

Solves ``min 1/2 (x - t)^T Q (x - t)`` subject to ``lower <= x <= upper``, the
metric projection of a target ``t`` onto a box.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .solve import factorize


class BoxQpWarning(RuntimeWarning):
    pass


@dataclass
class BoxQp:
    Q: sp.spmatrix
    target: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.Q = sp.csr_matrix(self.Q)
        self.target = np.asarray(self.target, dtype=float)
        n = self.target.size
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if self.Q.shape != (n, n):
            raise ValueError(f"Q has shape {self.Q.shape}, expected {(n, n)}")

    def objective(self, x: np.ndarray) -> float:
        r = x - self.target
        return 0.5 * float(r @ (self.Q @ r))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.Q @ (x - self.target)


def kkt_residual(qp: BoxQp, x: np.ndarray, g: np.ndarray | None = None) -> float:
    """Max-norm of ``x - clip(x - grad, lower, upper)``.

    Zero exactly at the minimizer: free components have zero gradient and
    components on a bound have a multiplier of the right sign.
    """
    if g is None:
        g = qp.gradient(x)
    return float(np.max(np.abs(x - np.clip(x - g, qp.lower, qp.upper)), initial=0.0))


@dataclass
class BoxQpResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


def solve_box_qp(
    qp: BoxQp,
    tol: float = 1e-9,
    x0: np.ndarray | None = None,
    max_iter: int = 200,
) -> BoxQpResult:
    """Active-set solver with exact subspace Newton steps.

    Each iteration fixes the components sitting on a bound whose gradient
    points outward (the working set), solves the equality-constrained problem
    on the remaining components with a sparse factorization, and searches
    along the projected Newton path.  When that path gives no sufficient
    decrease a projected-gradient (Cauchy) step is taken instead, which
    always decreases the objective and updates the working set.  ``x0``
    warm-starts the working set, typically from the previous outer iterate.
    """
    lo, hi = qp.lower, qp.upper
    x = np.clip(qp.target if x0 is None else np.asarray(x0, dtype=float), lo, hi)
    fx = qp.objective(x)
    diag = qp.Q.diagonal()
    if np.any(diag <= 0):
        raise ValueError("Q must have a positive diagonal")

    res = np.inf
    for it in range(1, max_iter + 1):
        g = qp.gradient(x)
        res = kkt_residual(qp, x, g)
        if res <= tol:
            return BoxQpResult(x, it - 1, res, True)

        fixed = ((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0))
        free = np.flatnonzero(~fixed)
        x_new = None
        if free.size:
            d = np.zeros_like(x)
            Qff = qp.Q[free][:, free]
            d[free] = factorize(Qff).solve(-g[free])
            step = 1.0
            while step > 1e-10:
                trial = np.clip(x + step * d, lo, hi)
                decrease = g @ (trial - x)
                f_trial = qp.objective(trial)
                if decrease < 0 and f_trial <= fx + 1e-4 * decrease:
                    x_new, f_new = trial, f_trial
                    break
                step *= 0.5
        if x_new is None:
            x_new, f_new = _cauchy_step(qp, x, fx, g)
        if f_new > fx:
            break
        if f_new == fx and np.array_equal(x_new, x):
            break
        x, fx = x_new, f_new

    g = qp.gradient(x)
    res = kkt_residual(qp, x, g)
    converged = res <= tol
    if not converged:
        warnings.warn(
            f"box QP stopped with KKT residual {res:.3e} > {tol:.1e}", BoxQpWarning, stacklevel=2
        )
    return BoxQpResult(x, max_iter, res, converged)


def _cauchy_step(qp: BoxQp, x, fx, g):
    """Projected-gradient step with Armijo backtracking along the projection arc."""
    gQg = float(g @ (qp.Q @ g))
    step = float(g @ g) / gQg if gQg > 0 else 1.0
    while step > 1e-16:
        trial = np.clip(x - step * g, qp.lower, qp.upper)
        f_trial = qp.objective(trial)
        if f_trial <= fx + 1e-4 * float(g @ (trial - x)):
            return trial, f_trial
        step *= 0.5
    return x, fx

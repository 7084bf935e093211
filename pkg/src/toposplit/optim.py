"""Outer iterations: forward-backward splitting, two-metric projection,
gradient projection and the optimality-criteria baselines.

Every algorithm works on the nodal density vector ``z`` inside the box
``[delta_rho, 1]^m``.  One iteration builds a candidate from the current
iterate, optionally backtracks on the step size with an Armijo test on the
regularized objective ``Jt = J + z^T G z / 2``, and records the outcome.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .assemble import HelmholtzFilter, assemble_filter
from .boxqp import BoxQp, solve_box_qp
from .model import COMPLIANCE, Evaluation, Problem, discreteness, hessian_model, objective_and_gradient
from .solve import factorize

log = logging.getLogger(__name__)

ALGORITHMS = ("fbs", "tmp", "gp", "oc", "sensfilter")


@dataclass
class OptimizerConfig:
    algorithm: str = "tmp"
    hessian: str = "reciprocal"
    tau0: float = 1.0
    sigma: float = 0.6
    nu: float = 1e-3
    move_limit: float = 1.0
    eps_active: float = 1e-3
    eps1: float = 1e-5
    eps2: float = 1e-4
    max_iter: int = 1000
    max_backtracks: int = 30
    backtracking: bool = True
    delta_E: float | None = None  # default 1e-3 * lambda
    alpha: float | None = None  # default 4 * lambda * element area
    filter_radius: float | None = None  # default 2 * element size
    lam_start: float | None = None  # continuation: switch to the problem's lambda once J < 0
    qp_tol: float = 1e-9
    e2_clamp: str = "box"  # "box": [delta_rho, 1]; "unit": [0, 1]

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0, 1)")
        if not 0 < self.move_limit <= 1:
            raise ValueError("move_limit must lie in (0, 1]")
        if not self.tau0 > 0:
            raise ValueError("tau0 must be positive")
        if self.e2_clamp not in ("box", "unit"):
            raise ValueError("e2_clamp must be 'box' or 'unit'")


@dataclass
class ActiveSet:
    lower: np.ndarray
    upper: np.ndarray

    @property
    def union(self) -> np.ndarray:
        return self.lower | self.upper

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.union))


@dataclass
class IterationRecord:
    n: int
    tau: float
    backtracks: int
    output: float
    J: float
    R: float
    V: float
    Jt: float
    E1: float
    E2: float
    active: int = 0
    lam: float = 0.0
    descent_ok: bool = True
    majorized: bool | None = None


@dataclass
class RunResult:
    z: np.ndarray
    history: list[IterationRecord]
    status: str  # "converged" or "max_iter"
    summary: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


# -- building blocks ---------------------------------------------------------

def move_bounds(z: np.ndarray, move_limit: float, delta_rho: float) -> tuple[np.ndarray, np.ndarray]:
    return np.maximum(delta_rho, z - move_limit), np.minimum(1.0, z + move_limit)


def fbs_step(
    G: sp.spmatrix,
    z: np.ndarray,
    H: np.ndarray,
    tau: float,
    bounds: tuple[np.ndarray, np.ndarray],
    grad: np.ndarray,
    qp_tol: float = 1e-9,
) -> np.ndarray:
    """Interim point ``z - tau (H + tau G)^{-1} grad`` projected in the ``H + tau G`` metric."""
    Q = (sp.diags(H) + tau * G).tocsr()
    target = z - tau * factorize(Q).solve(grad)
    lo, hi = bounds
    at_bound = (z <= lo) | (z >= hi)
    x0 = np.where(at_bound, z, np.clip(target, lo, hi))
    return solve_box_qp(BoxQp(Q, target, lo, hi), tol=qp_tol, x0=x0).x


def tmp_active_set(z: np.ndarray, grad: np.ndarray, delta_rho: float, eps: float = 1e-3) -> ActiveSet:
    return ActiveSet(
        lower=(z <= delta_rho + eps) & (grad > 0),
        upper=(z >= 1.0 - eps) & (grad < 0),
    )


def build_scaling(H: np.ndarray, tau: float, G: sp.spmatrix, active: ActiveSet) -> sp.csr_matrix:
    """``H + tau G`` with every off-diagonal entry in an active row or column removed."""
    A = (sp.diags(H) + tau * G).tocoo()
    act = active.union
    keep = (A.row == A.col) | ~(act[A.row] | act[A.col])
    return sp.csr_matrix((A.data[keep], (A.row[keep], A.col[keep])), shape=A.shape)


def tmp_step(
    G: sp.spmatrix,
    z: np.ndarray,
    H: np.ndarray,
    tau: float,
    bounds: tuple[np.ndarray, np.ndarray],
    active: ActiveSet,
    grad: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Two-metric step: scaled gradient step, then a componentwise clamp.

    Returns the candidate and the scaled step ``tau D^{-1} grad``.
    """
    scaled = tau * factorize(build_scaling(H, tau, G, active)).solve(grad)
    lo, hi = bounds
    return np.minimum(np.maximum(lo, z - scaled), hi), scaled


def gp_step(z: np.ndarray, grad: np.ndarray, tau: float, alpha: float, delta_rho: float) -> np.ndarray:
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return np.clip(z - (tau / alpha) * grad, delta_rho, 1.0)


def strain_energy_ratio(PtE: np.ndarray, v: np.ndarray, lam: float) -> np.ndarray:
    """Nodal ``e_lambda``: nodal strain energy over the volume price of the node."""
    return PtE / (lam * v)


def oc_step(z: np.ndarray, e_lam: np.ndarray, bounds: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    if np.any(e_lam < 0):
        raise ValueError("optimality criteria update needs non-negative strain energies")
    lo, hi = bounds
    return np.clip(z * np.sqrt(e_lam), lo, hi)


def sensfilter_step(
    z: np.ndarray,
    e_lam: np.ndarray,
    filt: HelmholtzFilter,
    bounds: tuple[np.ndarray, np.ndarray],
) -> np.ndarray:
    """OC update with the filtered sensitivity ``F[z e] / z``."""
    if np.any(e_lam < 0):
        raise ValueError("sensitivity filtering needs non-negative strain energies")
    smoothed = filt.apply(z * e_lam)
    if np.any(smoothed < 0):
        log.debug("flooring %d negative filtered values", int(np.sum(smoothed < 0)))
        smoothed = np.maximum(smoothed, 0.0)
    lo, hi = bounds
    return np.clip(np.sqrt(z * smoothed), lo, hi)


def tmp_direction(z, z_next, scaled, active: ActiveSet) -> np.ndarray:
    return np.where(active.union, z - z_next, scaled)


def convergence(
    z: np.ndarray,
    z_next: np.ndarray,
    grad_next: np.ndarray,
    Jt: float,
    Jt_next: float,
    eps1: float,
    eps2: float,
    lower: float = 0.0,
) -> tuple[float, float, bool]:
    """Relative objective change ``E1`` and projected-gradient residual ``E2``.

    ``E2`` clamps ``z_next - grad_next`` onto ``[lower, 1]``.
    """
    E1 = abs(Jt_next - Jt) / abs(Jt) if Jt != 0 else abs(Jt_next - Jt)
    E2 = float(np.linalg.norm(np.clip(z_next - grad_next, lower, 1.0) - z_next) / np.linalg.norm(z_next))
    return E1, E2, (E1 <= eps1 and E2 <= eps2)


@dataclass
class StepOutcome:
    z: np.ndarray
    ev: Evaluation
    tau: float
    backtracks: int
    descent_ok: bool
    active: int = 0
    majorized: bool | None = None


def backtrack(step_fn, evaluate, ev0: Evaluation, tau0, sigma, nu, max_backtracks, enabled=True):
    """Shrink ``tau = sigma^k tau0`` until the Armijo test holds.

    ``step_fn(tau)`` returns ``(candidate, direction)``; the test is
    ``Jt(z) - Jt(candidate) >= nu * direction^T grad Jt(z)``.  When the budget
    runs out, the best non-increasing candidate is returned (or the current
    iterate) with ``descent_ok=False``.
    """
    tau = tau0
    best = None
    for k in range(max_backtracks + 1):
        cand, direction = step_fn(tau)
        ev = evaluate(cand)
        ok = ev0.Jt - ev.Jt >= nu * float(direction @ ev0.grad_Jt)
        if ok or not enabled:
            return StepOutcome(cand, ev, tau, k, ok)
        if best is None or ev.Jt < best[1].Jt:
            best = (cand, ev, tau)
        tau *= sigma
    warnings.warn("backtracking budget exhausted", RuntimeWarning, stacklevel=2)
    cand, ev, tau = best
    if ev.Jt > ev0.Jt:
        return StepOutcome(ev0.z, ev0, tau, max_backtracks, False)
    return StepOutcome(cand, ev, tau, max_backtracks, False)


# -- driver -------------------------------------------------------------------

def _iterate(problem: Problem, cfg: OptimizerConfig, ev: Evaluation, lam: float, filt) -> StepOutcome:
    ops = problem.ops
    z = ev.z
    grad = ev.grad_Jt
    bounds = move_bounds(z, cfg.move_limit, problem.delta_rho)
    evaluate = lambda cand: objective_and_gradient(ops, cand, problem.p, lam, problem.kind)  # noqa: E731
    alpha = cfg.alpha if cfg.alpha is not None else 4.0 * lam * ops.mesh.element_area

    if cfg.algorithm in ("oc", "sensfilter"):
        if problem.kind != COMPLIANCE:
            raise ValueError(f"{cfg.algorithm} only applies to compliance problems")
        e_lam = strain_energy_ratio(ev.PtE, ops.v, lam)
        if cfg.algorithm == "oc":
            cand = oc_step(z, e_lam, bounds)
        else:
            cand = sensfilter_step(z, e_lam, filt, bounds)
        return StepOutcome(cand, evaluate(cand), 1.0, 0, True)

    if cfg.algorithm == "gp":
        def step(tau):
            cand = gp_step(z, grad, tau, alpha, problem.delta_rho)
            return cand, z - cand

        return backtrack(step, evaluate, ev, cfg.tau0, cfg.sigma, cfg.nu, cfg.max_backtracks, cfg.backtracking)

    delta_E = cfg.delta_E if cfg.delta_E is not None else 1e-3 * lam
    H = hessian_model(cfg.hessian, z, ev.PtE, delta_E, alpha).diag

    if cfg.algorithm == "fbs":
        def step(tau):
            cand = fbs_step(ops.G, z, H, tau, bounds, grad, cfg.qp_tol)
            return cand, z - cand

        active = 0
    else:
        act = tmp_active_set(z, grad, problem.delta_rho, cfg.eps_active)
        active = act.size

        def step(tau):
            cand, scaled = tmp_step(ops.G, z, H, tau, bounds, act, grad)
            return cand, tmp_direction(z, cand, scaled, act)

    out = backtrack(step, evaluate, ev, cfg.tau0, cfg.sigma, cfg.nu, cfg.max_backtracks, cfg.backtracking)
    out.active = active
    dz = out.z - z
    model = ev.J + float(dz @ ev.grad_J) + 0.5 / out.tau * float(dz @ (H * dz))
    out.majorized = bool(out.ev.J <= model + 1e-12 * abs(model))
    return out


def run(
    problem: Problem,
    config: OptimizerConfig | None = None,
    z0: np.ndarray | None = None,
    callback=None,
) -> RunResult:
    """Iterate from ``z0`` (uniform 1/2 by default) until convergence or ``max_iter``.

    With ``config.lam_start`` set, the volume price starts there and jumps to
    ``problem.lam`` at the first iterate with ``J < 0``; convergence is only
    declared at the final price.
    """
    cfg = config or OptimizerConfig()
    ops = problem.ops
    lam_final = problem.lam
    lam = lam_final if cfg.lam_start is None else cfg.lam_start
    z = np.full(problem.n, 0.5) if z0 is None else np.clip(np.asarray(z0, dtype=float), problem.delta_rho, 1.0)

    filt = None
    if cfg.algorithm == "sensfilter":
        r = cfg.filter_radius if cfg.filter_radius is not None else 2.0 * ops.mesh.element_size
        filt = assemble_filter(ops.mesh, r)

    e2_lower = problem.delta_rho if cfg.e2_clamp == "box" else 0.0
    fixed_point = cfg.algorithm in ("oc", "sensfilter")

    ev = objective_and_gradient(ops, z, problem.p, lam, problem.kind)
    history: list[IterationRecord] = []
    status = "max_iter"
    for n in range(1, cfg.max_iter + 1):
        out = _iterate(problem, cfg, ev, lam, filt)
        E1, E2, conv = convergence(ev.z, out.z, out.ev.grad_Jt, ev.Jt, out.ev.Jt, cfg.eps1, cfg.eps2, e2_lower)
        if fixed_point:
            # the heuristic updates do not target stationarity of Jt
            step = np.linalg.norm(out.z - ev.z) / np.linalg.norm(out.z)
            conv = E1 <= cfg.eps1 and step <= cfg.eps2
        nxt = out.ev
        rec = IterationRecord(
            n=n, tau=out.tau, backtracks=out.backtracks, output=nxt.output, J=nxt.J, R=nxt.R,
            V=nxt.V, Jt=nxt.Jt, E1=E1, E2=E2, active=out.active, lam=lam,
            descent_ok=out.descent_ok, majorized=out.majorized,
        )
        history.append(rec)
        log.info(
            "it %4d  tau %.3g  bt %d  out %.5g  R %.4g  V %.4f  Jt %.6g  E1 %.3e  E2 %.3e",
            n, rec.tau, rec.backtracks, rec.output, rec.R, rec.V, rec.Jt, E1, E2,
        )
        if callback is not None:
            callback(rec, out.z)
        ev = nxt
        if conv and lam == lam_final:
            status = "converged"
            break
        if lam != lam_final and ev.J < 0:
            lam = lam_final
            ev = objective_and_gradient(ops, ev.z, problem.p, lam, problem.kind, state=ev.state)

    result = RunResult(z=ev.z, history=history, status=status)
    result.summary = summarize(problem, result)
    return result


def summarize(problem: Problem, result: RunResult) -> dict:
    last = result.history[-1] if result.history else None
    out = {
        "status": result.status,
        "iterations": len(result.history),
        "backtracks": int(sum(r.backtracks for r in result.history)),
        "discreteness": discreteness(problem.ops, result.z, problem.delta_rho),
    }
    if last is not None:
        rec = asdict(last)
        out.update({k: rec[k] for k in ("output", "J", "R", "V", "Jt", "E1", "E2", "lam")})
    return out

"""Objectives, sensitivities and diagonal Hessian models for nodal densities."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assemble import AssembledOperators, assemble_stiffness
from .solve import Factorization, factorize

COMPLIANCE = "compliance"
MECHANISM = "mechanism"

HESSIAN_KINDS = ("identity", "reciprocal", "reciprocal-absolute")


def problem_kind(ops: AssembledOperators) -> str:
    return MECHANISM if ops.bc.is_mechanism else COMPLIANCE


@dataclass
class StateSolution:
    """Displacements and elemental sensitivity energies at one design.

    ``E`` follows the convention ``grad J = -P^T E + lambda v``.  For compliance
    it is the strain energy vector ``p rho_e^(p-1) U^T k_e U``; for a mechanism
    it is ``-p rho_e^(p-1) Ubar^T k_e U`` and may change sign.
    """

    U: np.ndarray
    E: np.ndarray
    output: float
    kind: str
    U_adj: np.ndarray | None = None
    factor: Factorization | None = field(default=None, repr=False)


def _element_energies(ops: AssembledOperators, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    edofs = ops.mesh.element_dofs
    return np.einsum("ei,ij,ej->e", ops.expand(a)[edofs], ops.k_e, ops.expand(b)[edofs])


def solve_state(ops: AssembledOperators, z: np.ndarray, p: float, kind: str | None = None) -> StateSolution:
    """Solve ``(K(z) + K_s) U = F`` and fill the elemental energies.

    For a mechanism the adjoint ``(K(z) + K_s) Ubar = L`` is solved with the
    same factorization.
    """
    kind = kind or problem_kind(ops)
    factor = factorize(assemble_stiffness(ops, z, p) + ops.K_s)
    U = factor.solve(ops.F)
    rho = ops.P @ z
    state = StateSolution(U=U, E=np.zeros(ops.mesh.n_elements), output=0.0, kind=kind, factor=factor)
    if kind == COMPLIANCE:
        state.output = float(ops.F @ U)
        state.E = p * rho ** (p - 1) * _element_energies(ops, U, U)
    elif kind == MECHANISM:
        state.U_adj = solve_adjoint(ops, z, p, state)
        state.output = float(-(ops.L @ U))
        state.E = -p * rho ** (p - 1) * _element_energies(ops, state.U_adj, U)
    else:
        raise ValueError(f"unknown problem kind {kind!r}")
    return state


def solve_adjoint(ops: AssembledOperators, z: np.ndarray, p: float, state: StateSolution) -> np.ndarray:
    """Adjoint displacements ``Ubar`` solving ``(K(z) + K_s) Ubar = L``."""
    if ops.L is None:
        raise ValueError("adjoint requested for a problem without an output functional")
    factor = state.factor
    if factor is None:
        factor = factorize(assemble_stiffness(ops, z, p) + ops.K_s)
    return factor.solve(ops.L)


@dataclass
class Evaluation:
    """Objective terms and gradients at one design.

    ``output`` is the structural term: compliance ``F^T U`` or ``-L^T U``.
    ``J = output + lam * z^T v``; ``R = z^T G z / 2``; ``Jt = J + R``.
    """

    z: np.ndarray
    lam: float
    J: float
    grad_J: np.ndarray
    R: float
    V: float
    Jt: float
    grad_Jt: np.ndarray
    output: float
    PtE: np.ndarray = field(repr=False)
    state: StateSolution = field(repr=False)


def volume_fraction(ops: AssembledOperators, z: np.ndarray) -> float:
    rho = ops.P @ z
    return float(rho.sum() * ops.mesh.element_area / ops.mesh.area)


def objective_and_gradient(
    ops: AssembledOperators,
    z: np.ndarray,
    p: float,
    lam: float,
    kind: str | None = None,
    state: StateSolution | None = None,
) -> Evaluation:
    z = np.asarray(z, dtype=float)
    if state is None:
        state = solve_state(ops, z, p, kind)
    PtE = ops.P.T @ state.E
    Gz = ops.G @ z
    grad_J = -PtE + lam * ops.v
    J = state.output + lam * float(z @ ops.v)
    R = 0.5 * float(z @ Gz)
    return Evaluation(
        z=z, lam=lam, J=J, grad_J=grad_J, R=R, V=volume_fraction(ops, z),
        Jt=J + R, grad_Jt=grad_J + Gz, output=state.output, PtE=PtE, state=state,
    )


@dataclass
class HessianModel:
    """Diagonal curvature ``H_n``; ``diag`` always holds the full vector."""

    kind: str
    diag: np.ndarray

    def matrix(self) -> sp.dia_matrix:
        return sp.diags(self.diag)


def hessian_model(
    kind: str,
    z: np.ndarray,
    PtE: np.ndarray,
    delta_E: float,
    alpha: float | None = None,
) -> HessianModel:
    """Diagonal Hessian of the quadratic model of ``J``.

    ``PtE`` is the nodal energy ``P^T E``.  ``identity`` gives ``alpha`` on the
    diagonal; ``reciprocal`` gives ``max(2 [P^T E]_k / z_k, delta_E)``, the
    curvature of the reciprocal expansion of compliance; ``reciprocal-absolute``
    takes the absolute value first, for objectives whose energies change sign.
    """
    z = np.asarray(z, dtype=float)
    if kind == "identity":
        if alpha is None or alpha <= 0:
            raise ValueError("identity Hessian needs a positive alpha")
        return HessianModel(kind, np.full(z.shape, float(alpha)))
    if delta_E <= 0:
        raise ValueError("delta_E must be positive")
    h = 2.0 * np.asarray(PtE) / z
    if kind == "reciprocal-absolute":
        h = np.abs(h)
    elif kind != "reciprocal":
        raise ValueError(f"unknown Hessian kind {kind!r}")
    return HessianModel(kind, np.maximum(h, delta_E))


def discreteness(ops: AssembledOperators, z: np.ndarray, delta_rho: float) -> float:
    """Area average of ``4 (rho - delta_rho)(1 - rho)`` over elements, in percent."""
    rho = ops.P @ z
    total = np.sum(4.0 * (rho - delta_rho) * (1.0 - rho)) * ops.mesh.element_area
    return 100.0 * float(total / ops.mesh.area)


@dataclass
class Problem:
    """A discretized design problem: operators plus SIMP and volume parameters."""

    ops: AssembledOperators
    p: float = 3.0
    lam: float = 1.0
    delta_rho: float = 1e-3

    @property
    def kind(self) -> str:
        return problem_kind(self.ops)

    @property
    def n(self) -> int:
        return self.ops.mesh.n_nodes

    def evaluate(self, z: np.ndarray, lam: float | None = None) -> Evaluation:
        return objective_and_gradient(self.ops, z, self.p, self.lam if lam is None else lam, self.kind)

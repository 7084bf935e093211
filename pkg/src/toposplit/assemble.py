"""Finite element operators on a structured bilinear quadrilateral grid."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .grid import BoundaryConditions, Mesh
from .solve import Factorization, factorize

# Scalar Q1 element matrices on a square, nodes counterclockwise from lower left.
_LAPLACE_Q1 = np.array(
    [[4.0, -1.0, -2.0, -1.0],
     [-1.0, 4.0, -1.0, -2.0],
     [-2.0, -1.0, 4.0, -1.0],
     [-1.0, -2.0, -1.0, 4.0]]
) / 6.0
_MASS_Q1 = np.array(
    [[4.0, 2.0, 1.0, 2.0],
     [2.0, 4.0, 2.0, 1.0],
     [1.0, 2.0, 4.0, 2.0],
     [2.0, 1.0, 2.0, 4.0]]
) / 36.0


def element_stiffness(a: float = 1.0, E0: float = 1.0, nu: float = 0.3) -> np.ndarray:
    """Exactly integrated plane-stress stiffness of a square bilinear element.

    Dofs are ordered ``(x1, y1, ..., x4, y4)`` with nodes counterclockwise from
    the lower left.  In 2-D the result does not depend on the side length ``a``.
    """
    if not a > 0:
        raise ValueError("element size must be positive")
    if not 0.0 <= nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {nu}")
    k = np.array([
        1 / 2 - nu / 6, 1 / 8 + nu / 8, -1 / 4 - nu / 12, -1 / 8 + 3 * nu / 8,
        -1 / 4 + nu / 12, -1 / 8 - nu / 8, nu / 6, 1 / 8 - 3 * nu / 8,
    ])
    pattern = np.array([
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ])
    return E0 / (1.0 - nu**2) * k[pattern]


def _assemble_scalar(mesh: Mesh, ke: np.ndarray) -> sp.csr_matrix:
    """Assemble a 4x4 nodal element matrix over all elements."""
    rows = np.repeat(mesh.elements, 4, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 4)).ravel()
    data = np.tile(ke.ravel(), mesh.n_elements)
    return sp.csr_matrix((data, (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))


def projection_matrix(mesh: Mesh) -> sp.csr_matrix:
    """``P[e, k] = phi_k(x_e)``: bilinear shape values at element centroids."""
    rows = np.repeat(np.arange(mesh.n_elements), 4)
    return sp.csr_matrix(
        (np.full(rows.size, 0.25), (rows, mesh.elements.ravel())),
        shape=(mesh.n_elements, mesh.n_nodes),
    )


@dataclass
class HelmholtzFilter:
    """Discrete ``(I - r^2 Laplace)^{-1}`` with homogeneous Neumann conditions.

    Filtering a nodal field ``psi`` solves ``(M + r^2 L) psi_f = M psi``.
    """

    radius: float
    M: sp.csr_matrix = field(repr=False)
    system: sp.csr_matrix = field(repr=False)
    _factor: Factorization = field(repr=False)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self._factor.solve(self.M @ psi)

    __call__ = apply


def assemble_filter(mesh: Mesh, r: float) -> HelmholtzFilter:
    if r < 0:
        raise ValueError("filter radius must be non-negative")
    M = _assemble_scalar(mesh, mesh.element_area * _MASS_Q1)
    L = _assemble_scalar(mesh, _LAPLACE_Q1)
    system = (M + r**2 * L).tocsr()
    return HelmholtzFilter(float(r), M, system, factorize(system))


@dataclass
class AssembledOperators:
    """Design-independent operators of a discretized problem.

    Matrices acting on displacements are already reduced to the free dofs
    listed in ``free_dofs``.
    """

    mesh: Mesh
    bc: BoundaryConditions
    beta: float
    k_e: np.ndarray = field(repr=False)
    P: sp.csr_matrix = field(repr=False)
    G: sp.csr_matrix = field(repr=False)
    v: np.ndarray = field(repr=False)
    K_s: sp.csr_matrix = field(repr=False)
    free_dofs: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    L: np.ndarray | None = field(repr=False)
    # K(z).data = _scatter @ rho**p on the fixed pattern (_indices, _indptr)
    _scatter: sp.csr_matrix = field(repr=False)
    _indices: np.ndarray = field(repr=False)
    _indptr: np.ndarray = field(repr=False)

    @property
    def n_free(self) -> int:
        return self.free_dofs.size

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """Scatter a free-dof vector into the full dof vector (zeros on supports)."""
        u = np.zeros(self.mesh.n_dofs)
        u[self.free_dofs] = u_free
        return u

    def element_densities(self, z: np.ndarray) -> np.ndarray:
        return self.P @ z


def assemble_operators(
    mesh: Mesh,
    bc: BoundaryConditions,
    beta: float,
    E0: float = 1.0,
    nu: float = 0.3,
) -> AssembledOperators:
    """Build ``P``, ``G`` (with ``beta`` folded in), ``v``, ``K_s`` and the reduced load."""
    if beta < 0:
        raise ValueError("regularization weight must be non-negative")
    k_e = element_stiffness(mesh.element_size, E0, nu)
    P = projection_matrix(mesh)
    G = (beta * _assemble_scalar(mesh, _LAPLACE_Q1)).tocsr()
    v = np.asarray(P.T @ np.full(mesh.n_elements, mesh.element_area)).ravel()

    free_mask = np.ones(mesh.n_dofs, dtype=bool)
    free_mask[bc.fixed_dofs] = False
    free_dofs = np.flatnonzero(free_mask)
    reduced = np.full(mesh.n_dofs, -1, dtype=np.int64)
    reduced[free_dofs] = np.arange(free_dofs.size)
    n = free_dofs.size

    # Fixed sparsity pattern of the reduced stiffness and the element-to-entry map.
    edofs = reduced[mesh.element_dofs]
    rows = np.repeat(edofs, 8, axis=1)
    cols = np.tile(edofs, (1, 8))
    elem = np.repeat(np.arange(mesh.n_elements), 64)
    vals = np.tile(k_e.ravel(), mesh.n_elements)
    keep = (rows.ravel() >= 0) & (cols.ravel() >= 0)
    r, c, elem, vals = rows.ravel()[keep], cols.ravel()[keep], elem[keep], vals[keep]
    keys, slot = np.unique(r * n + c, return_inverse=True)
    indices = keys % n
    indptr = np.searchsorted(keys // n, np.arange(n + 1)).astype(np.int64)
    scatter = sp.csr_matrix((vals, (slot, elem)), shape=(keys.size, mesh.n_elements))

    ks = np.zeros(mesh.n_dofs)
    for dof, k in bc.springs:
        ks[dof] += k
    K_s = sp.diags(ks[free_dofs]).tocsr()

    F = bc.load_vector(mesh.n_dofs)[free_dofs]
    L = bc.output_vector(mesh.n_dofs)[free_dofs] if bc.is_mechanism else None
    return AssembledOperators(
        mesh, bc, float(beta), k_e, P, G, v, K_s, free_dofs, F, L,
        scatter, indices, indptr,
    )


def assemble_stiffness(ops: AssembledOperators, z: np.ndarray, p: float) -> sp.csr_matrix:
    """``K(z) = sum_e ([P z]_e)^p k_e`` reduced to the free dofs."""
    rho = ops.P @ np.asarray(z, dtype=float)
    if np.any(rho <= 0) or not np.all(np.isfinite(rho)):
        raise ValueError("elemental densities must be positive and finite")
    return stiffness_from_element_moduli(ops, rho**p)


def stiffness_from_element_moduli(ops: AssembledOperators, moduli: np.ndarray) -> sp.csr_matrix:
    n = ops.n_free
    data = ops._scatter @ moduli
    return sp.csr_matrix((data, ops._indices.copy(), ops._indptr.copy()), shape=(n, n))

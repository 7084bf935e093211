"""Structured quadrilateral meshes and benchmark boundary conditions.

Nodes are numbered column-major, bottom to top: node ``(i, j)`` with column
``i in [0, nx]`` and row ``j in [0, ny]`` has index ``i * (ny + 1) + j``.
Elements follow the same ordering, ``e = i * ny + j``.  Node ``k`` owns the
displacement dofs ``2k`` (x) and ``2k + 1`` (y).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Uniform grid of ``nx`` by ``ny`` square bilinear elements of side ``element_size``."""

    nx: int
    ny: int
    element_size: float
    node_coords: np.ndarray = field(repr=False)
    elements: np.ndarray = field(repr=False)
    centroids: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    @property
    def element_area(self) -> float:
        return self.element_size**2

    @property
    def area(self) -> float:
        """Area of the meshed region."""
        return self.n_elements * self.element_area

    @property
    def element_dofs(self) -> np.ndarray:
        """``(l, 8)`` dof indices ordered ``x1, y1, ..., x4, y4``."""
        return np.repeat(2 * self.elements, 2, axis=1) + np.tile([0, 1], 4)

    def node(self, i: int, j: int) -> int:
        return i * (self.ny + 1) + j

    def elemental_grid(self, values: np.ndarray) -> np.ndarray:
        """Reshape an elemental vector to an ``(ny, nx)`` image, row 0 at the bottom."""
        return np.asarray(values).reshape(self.nx, self.ny).T


def build_grid(nx: int, ny: int, a: float) -> Mesh:
    """Build a structured grid of ``nx * ny`` square elements with side ``a``.

    Element corners are listed counterclockwise starting at the lower-left node.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"element counts must be positive integers, got nx={nx}, ny={ny}")
    if not a > 0:
        raise ValueError(f"element size must be positive, got {a}")
    nx, ny = int(nx), int(ny)

    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    node_coords = np.column_stack([ii.ravel() * a, jj.ravel() * a]).astype(float)

    ei, ej = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ei, ej = ei.ravel(), ej.ravel()
    n1 = ei * (ny + 1) + ej
    n2 = (ei + 1) * (ny + 1) + ej
    elements = np.column_stack([n1, n2, n2 + 1, n1 + 1])
    centroids = node_coords[elements].mean(axis=1)
    return Mesh(nx, ny, float(a), node_coords, elements, centroids)


@dataclass
class BoundaryConditions:
    """Supports, loads, springs and the output functional of a benchmark.

    ``springs`` holds ``(dof, stiffness)`` pairs of grounded point springs and
    ``output_dofs`` holds ``(dof, weight)`` pairs defining the output vector
    ``L`` of a mechanism problem (empty for compliance problems).
    """

    fixed_dofs: np.ndarray
    point_loads: list[tuple[int, float]]
    springs: list[tuple[int, float]] = field(default_factory=list)
    output_dofs: list[tuple[int, float]] = field(default_factory=list)

    def __post_init__(self):
        self.fixed_dofs = np.unique(np.asarray(self.fixed_dofs, dtype=np.int64))
        if self.fixed_dofs.size == 0:
            raise ValueError("at least one displacement dof must be fixed")
        loaded = {d for d, _ in self.point_loads}
        clash = loaded.intersection(self.fixed_dofs.tolist())
        if clash:
            raise ValueError(f"dofs {sorted(clash)} are both loaded and fixed")

    @property
    def is_mechanism(self) -> bool:
        return bool(self.output_dofs)

    def load_vector(self, n_dofs: int) -> np.ndarray:
        f = np.zeros(n_dofs)
        for dof, value in self.point_loads:
            f[dof] += value
        return f

    def output_vector(self, n_dofs: int) -> np.ndarray:
        out = np.zeros(n_dofs)
        for dof, weight in self.output_dofs:
            out[dof] += weight
        return out


def mbb_problem(nx: int, ny: int, load: float = 1.0) -> tuple[Mesh, BoundaryConditions]:
    """Half MBB beam of height 1: symmetry on the left edge, roller at bottom right.

    A downward point load of magnitude ``load`` acts at the top-left node.
    """
    mesh = build_grid(nx, ny, 1.0 / ny)
    left_x = [2 * mesh.node(0, j) for j in range(ny + 1)]
    roller_y = 2 * mesh.node(nx, 0) + 1
    bc = BoundaryConditions(
        fixed_dofs=np.array(left_x + [roller_y]),
        point_loads=[(2 * mesh.node(0, ny) + 1, -float(load))],
    )
    return mesh, bc


def inverter_problem(
    nx: int, ny: int, k_in: float = 0.1, k_out: float = 0.1, load: float = 1.0
) -> tuple[Mesh, BoundaryConditions]:
    """Force inverter on an ``nx`` by ``ny`` domain of height 1, meshed as its upper half.

    Only the ``nx`` by ``ny // 2`` upper half is discretized; its bottom edge
    is the horizontal symmetry line.  The actuator (force ``load`` plus spring
    ``k_in``) pushes the bottom-left node in +x; the workpiece spring ``k_out``
    sits at the bottom-right node and the output functional rewards
    displacement there in -x.  A short segment at the top of the left edge is
    clamped.
    """
    if k_in <= 0 or k_out <= 0:
        raise ValueError("spring stiffnesses must be positive")
    if ny < 2 or ny % 2:
        raise ValueError(f"ny must be even and at least 2 to mesh the upper half, got {ny}")
    half = ny // 2
    mesh = build_grid(nx, half, 1.0 / ny)
    symmetry_y = [2 * mesh.node(i, 0) + 1 for i in range(nx + 1)]
    n_clamped = max(2, half // 8 + 1)
    clamped = []
    for j in range(half - n_clamped + 1, half + 1):
        clamped += [2 * mesh.node(0, j), 2 * mesh.node(0, j) + 1]
    dof_in = 2 * mesh.node(0, 0)
    dof_out = 2 * mesh.node(nx, 0)
    bc = BoundaryConditions(
        fixed_dofs=np.array(symmetry_y + clamped),
        point_loads=[(dof_in, float(load))],
        springs=[(dof_in, float(k_in)), (dof_out, float(k_out))],
        output_dofs=[(dof_out, -float(k_out))],
    )
    return mesh, bc

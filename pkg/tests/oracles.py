"""Independent reference computations used by the test-suite.

Nothing here imports the code paths it checks: element matrices come from
Gauss quadrature, global systems from dense assembly loops, box QPs from
exhaustive active-set enumeration.
"""
import itertools

import numpy as np


def gauss_element_stiffness(a, E0, nu):
    """Plane-stress Q4 stiffness by 2x2 Gauss quadrature on the square [0, a]^2."""
    D = E0 / (1 - nu**2) * np.array([[1, nu, 0], [nu, 1, 0], [0, 0, (1 - nu) / 2]])
    xi_nodes = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
    gp = 1 / np.sqrt(3)
    K = np.zeros((8, 8))
    for xi, eta in itertools.product((-gp, gp), repeat=2):
        dN_dxi = 0.25 * xi_nodes[:, 0] * (1 + eta * xi_nodes[:, 1])
        dN_deta = 0.25 * xi_nodes[:, 1] * (1 + xi * xi_nodes[:, 0])
        jac = a / 2
        dN_dx, dN_dy = dN_dxi / jac, dN_deta / jac
        B = np.zeros((3, 8))
        B[0, 0::2] = dN_dx
        B[1, 1::2] = dN_dy
        B[2, 0::2] = dN_dy
        B[2, 1::2] = dN_dx
        K += B.T @ D @ B * jac**2
    return K


def dense_stiffness(mesh, ke, rho, p):
    """Dense global stiffness by an explicit element loop."""
    K = np.zeros((mesh.n_dofs, mesh.n_dofs))
    for e, nodes in enumerate(mesh.elements):
        dofs = [d for n in nodes for d in (2 * n, 2 * n + 1)]
        K[np.ix_(dofs, dofs)] += rho[e] ** p * ke
    return K


def dense_state(mesh, bc, ke, z, p):
    """Compliance, displacements and elemental energies from a dense solve."""
    rho = np.array([np.mean(z[nodes]) for nodes in mesh.elements])
    K = dense_stiffness(mesh, ke, rho, p)
    for dof, k in bc.springs:
        K[dof, dof] += k
    free = np.setdiff1d(np.arange(mesh.n_dofs), bc.fixed_dofs)
    f = np.zeros(mesh.n_dofs)
    for dof, val in bc.point_loads:
        f[dof] += val
    u = np.zeros(mesh.n_dofs)
    u[free] = np.linalg.solve(K[np.ix_(free, free)], f[free])
    energy = np.array([
        u[[d for n in nodes for d in (2 * n, 2 * n + 1)]] @ ke @ u[[d for n in nodes for d in (2 * n, 2 * n + 1)]]
        for nodes in mesh.elements
    ])
    return f @ u, u, p * rho ** (p - 1) * energy


def central_difference(fun, x, h=1e-6, indices=None):
    idx = range(x.size) if indices is None else indices
    out = np.zeros(x.size)
    for k in idx:
        e = np.zeros_like(x)
        e[k] = h
        out[k] = (fun(x + e) - fun(x - e)) / (2 * h)
    return out


def enumerate_box_qp(Q, t, lo, hi, tol=1e-9):
    """Minimizer of 1/2 (x-t)^T Q (x-t) on a box by trying all 3^n active sets.

    Free sets of equal size are handled as one batch: their free blocks are
    eliminated with a stacked solve, and every lower/upper assignment of the
    remaining components is checked for primal feasibility and dual signs.
    """
    n = t.size
    hits = []
    for k in range(n + 1):
        subsets = list(itertools.combinations(range(n), k))
        free = np.array(subsets, dtype=int).reshape(len(subsets), k)
        nb = n - k
        is_free = np.zeros((len(subsets), n), dtype=bool)
        np.put_along_axis(is_free, free, True, axis=1)
        bound = np.nonzero(~is_free)[1].reshape(len(subsets), nb)
        choices = np.array(list(itertools.product((False, True), repeat=nb)), dtype=bool).reshape(2**nb, nb)
        # X[s, c]: candidate for free set s and bound assignment c
        X = np.zeros((free.shape[0], choices.shape[0], n))
        xB = np.where(choices[None], hi[bound][:, None, :], lo[bound][:, None, :])
        np.put_along_axis(X, np.broadcast_to(bound[:, None, :], xB.shape), xB, axis=2)
        if k:
            QFF = Q[free[:, :, None], free[:, None, :]]
            QFB = Q[free[:, :, None], bound[:, None, :]]
            rhs = QFB @ np.swapaxes(xB - t[bound][:, None, :], 1, 2)
            xF = t[free][:, None, :] - np.swapaxes(np.linalg.solve(QFF, rhs), 1, 2)
            np.put_along_axis(X, np.broadcast_to(free[:, None, :], xF.shape), xF, axis=2)
        Gr = (X - t) @ Q.T
        ok = np.all((X >= lo - tol) & (X <= hi + tol), axis=2)
        if nb:
            gB = np.take_along_axis(Gr, np.broadcast_to(bound[:, None, :], xB.shape), axis=2)
            ok &= np.all(np.where(choices[None], gB <= tol, gB >= -tol), axis=2)
        if k:
            gF = np.take_along_axis(Gr, np.broadcast_to(free[:, None, :], (free.shape[0], choices.shape[0], k)), axis=2)
            ok &= np.all(np.abs(gF) <= tol, axis=2)
        hits.extend(X[ok])
    if not hits:
        raise AssertionError("no KKT point found")
    return hits[0], len(hits)


def armijo_rejections_1d(x0, tau0, sigma, nu):
    """Rejections for J = x^2/2 with step x - tau x (H = 1, G = 0, no bounds).

    Decrease is x0^2 (tau - tau^2/2) and the Armijo bound is nu tau x0^2, so a
    step is accepted iff tau <= 2 (1 - nu).
    """
    k = 0
    tau = tau0
    while tau > 2 * (1 - nu):
        tau *= sigma
        k += 1
    return k

"""P1 assembly of the nonlinear form, its Jacobian, interface mass and norms.

For a function ``u`` on a mesh the residual entry at vertex ``k`` is

    a(u, phi_k) - (f, phi_k) = int alpha(grad u) . grad phi_k + g(u) phi_k - f phi_k

Gradients of P1 functions are elementwise constant, so the flux part is
integrated exactly; quadrature only enters through ``g(u)`` and ``f``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from .mesh import Decomposition, Mesh
from .pstructure import PStructure

Source = Union[Callable[[np.ndarray], np.ndarray], float, None]

DEFAULT_ORDER = 4


@dataclass(frozen=True, eq=False)
class Quadrature:
    """Rule on the reference simplex; ``points`` in barycentric coordinates."""

    dim: int
    order: int
    points: np.ndarray  # (nq, dim+1)
    weights: np.ndarray  # (nq,), sum = 1 (interval) or 1/2 (triangle)

    @property
    def reference_measure(self) -> float:
        return 1.0 if self.dim == 1 else 0.5


@lru_cache(maxsize=None)
def make_quadrature(dim: int, order: int = DEFAULT_ORDER) -> Quadrature:
    """Gauss rule exact for polynomials of degree ``order``.

    Triangles use a collapsed (Duffy) tensor Gauss rule, which keeps all
    weights positive for any order.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    if dim == 1:
        n = int(np.ceil((order + 1) / 2))
        t, w = np.polynomial.legendre.leggauss(n)
        xi = 0.5 * (t + 1)
        pts = np.column_stack([1 - xi, xi])
        return Quadrature(1, order, pts, 0.5 * w)
    if dim == 2:
        n = int(np.ceil((order + 2) / 2))
        t, w = np.polynomial.legendre.leggauss(n)
        a, wa = 0.5 * (t + 1), 0.5 * w
        A, B = np.meshgrid(a, a, indexing="ij")
        WA, WB = np.meshgrid(wa, wa, indexing="ij")
        xi1 = A.ravel()
        xi2 = (B * (1 - A)).ravel()
        wts = (WA * WB * (1 - A)).ravel()
        pts = np.column_stack([1 - xi1 - xi2, xi1, xi2])
        return Quadrature(2, order, pts, wts)
    raise ValueError(f"unsupported dimension {dim}")


def default_quadrature(mesh: Mesh, quad: Quadrature | None = None) -> Quadrature:
    if quad is None:
        return make_quadrature(mesh.dim, DEFAULT_ORDER)
    if quad.dim != mesh.dim:
        raise ValueError("quadrature dimension does not match the mesh")
    return quad


@lru_cache(maxsize=128)
def _quad_data(mesh: Mesh, quad: Quadrature):
    phi = quad.points  # (nq, nloc) basis values = barycentric coordinates
    wq = np.outer(mesh.measures / quad.reference_measure, quad.weights)  # (ne, nq)
    xq = np.einsum("qk,ekd->eqd", phi, mesh.points[mesh.cells])
    return phi, wq, xq


def _source_values(f: Source, xq: np.ndarray) -> np.ndarray:
    if f is None:
        return np.zeros(xq.shape[:-1])
    if np.isscalar(f):
        return np.full(xq.shape[:-1], float(f))
    return np.broadcast_to(np.asarray(f(xq), dtype=float), xq.shape[:-1])


def gradients(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Elementwise constant gradient of a P1 function, shape (ne, d)."""
    return np.einsum("ekd,ek->ed", mesh.basis_gradients, u[mesh.cells])


def _check_function(mesh: Mesh, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.num_vertices,):
        raise ValueError(f"function of shape {u.shape} does not live on a mesh with {mesh.num_vertices} vertices")
    return u


def residual_vector(ps: PStructure, mesh: Mesh, u, f: Source = None,
                    quad: Quadrature | None = None) -> np.ndarray:
    """Unconstrained residual: entry k is a(u, phi_k) - (f, phi_k)."""
    u = _check_function(mesh, u)
    quad = default_quadrature(mesh, quad)
    phi, wq, xq = _quad_data(mesh, quad)
    G = mesh.basis_gradients
    flux = ps.alpha(gradients(mesh, u))
    local = np.einsum("ed,ekd->ek", flux, G) * mesh.measures[:, None]
    uq = u[mesh.cells] @ phi.T  # (ne, nq)
    react = (ps.g(uq) - _source_values(f, xq)) * wq
    local += react @ phi
    return np.bincount(mesh.cells.ravel(), local.ravel(), minlength=mesh.num_vertices)


def load_vector(mesh: Mesh, f: Source, quad: Quadrature | None = None) -> np.ndarray:
    quad = default_quadrature(mesh, quad)
    phi, wq, xq = _quad_data(mesh, quad)
    local = (_source_values(f, xq) * wq) @ phi
    return np.bincount(mesh.cells.ravel(), local.ravel(), minlength=mesh.num_vertices)


def assemble_residual(ps: PStructure, mesh: Mesh, u, f: Source = None,
                      quad: Quadrature | None = None) -> np.ndarray:
    """Residual with entries at dirichlet vertices masked to zero."""
    r = residual_vector(ps, mesh, u, f, quad)
    r[mesh.dirichlet_mask()] = 0.0
    return r


def jacobian_matrix(ps: PStructure, mesh: Mesh, u, quad: Quadrature | None = None,
                    eps_reg: float = 0.0) -> sp.csr_matrix:
    """Unconstrained derivative of :func:`residual_vector` with respect to ``u``."""
    u = _check_function(mesh, u)
    quad = default_quadrature(mesh, quad)
    phi, wq, _ = _quad_data(mesh, quad)
    G = mesh.basis_gradients
    D = ps.alpha_jac(gradients(mesh, u), eps_reg)
    local = np.einsum("eki,eij,elj->ekl", G, D, G) * mesh.measures[:, None, None]
    uq = u[mesh.cells] @ phi.T
    dg = ps.g_deriv(uq, eps_reg) * wq  # (ne, nq)
    local += np.einsum("eq,qk,ql->ekl", dg, phi, phi)
    nloc = mesh.cells.shape[1]
    rows = np.repeat(mesh.cells, nloc, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, nloc)).ravel()
    n = mesh.num_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def constrain(A: sp.spmatrix, constrained: np.ndarray) -> sp.csr_matrix:
    """Eliminate rows/cols of ``constrained`` dofs, placing 1 on their diagonal."""
    free = (~constrained).astype(float)
    P = sp.diags(free)
    return (P @ A @ P + sp.diags(constrained.astype(float))).tocsr()


def assemble_jacobian(ps: PStructure, mesh: Mesh, u, quad: Quadrature | None = None,
                      eps_reg: float = 1e-10) -> sp.csr_matrix:
    """Jacobian with dirichlet rows and columns replaced by identity."""
    return constrain(jacobian_matrix(ps, mesh, u, quad, eps_reg), mesh.dirichlet_mask())


@lru_cache(maxsize=64)
def _interface_mass(dec: Decomposition, order: int) -> np.ndarray:
    n = dec.num_interface
    if dec.mesh.dim == 1:
        return np.eye(1)
    mesh, ax = dec.mesh, dec.axis
    on_line = np.flatnonzero(np.abs(mesh.points[:, ax] - dec.cut) < 1e-12)
    on_line = on_line[np.argsort(mesh.points[on_line, 1 - ax], kind="stable")]
    pos = {int(g): k for k, g in enumerate(dec.iface_global)}
    q = make_quadrature(1, max(order, 2))
    phi, w = q.points, q.weights
    local = np.einsum("q,qk,ql->kl", w, phi, phi)  # reference segment of length 1
    M = np.zeros((n, n))
    for a, b in zip(on_line[:-1], on_line[1:]):
        h = np.linalg.norm(mesh.points[b] - mesh.points[a])
        ids = [pos.get(int(a)), pos.get(int(b))]
        for k in range(2):
            for l in range(2):
                if ids[k] is not None and ids[l] is not None:
                    M[ids[k], ids[l]] += h * local[k, l]
    return M


def interface_mass(dec: Decomposition, quad: Quadrature | None = None) -> np.ndarray:
    """Gram matrix of the interface nodal basis in L2(Gamma).

    For a 1D decomposition the interface is a single point and the
    pairing is the pointwise product, so the result is ``[[1.0]]``.
    """
    order = DEFAULT_ORDER if quad is None else quad.order
    M = _interface_mass(dec, order)
    M.setflags(write=False)
    return M


def interface_weights(dec: Decomposition, quad: Quadrature | None = None) -> np.ndarray:
    return interface_mass(dec, quad).sum(axis=1)


def l2_gamma_norm(M: np.ndarray, eta: np.ndarray) -> float:
    return float(np.sqrt(max(eta @ M @ eta, 0.0)))


def seminorm_grad_lp(mesh: Mesh, u, ps: PStructure) -> float:
    u = _check_function(mesh, u)
    gn = np.linalg.norm(gradients(mesh, u), axis=1)
    return float(np.sum(mesh.measures * gn**ps.p) ** (1 / ps.p))


def norm_lr(mesh: Mesh, u, ps: PStructure, quad: Quadrature | None = None) -> float:
    u = _check_function(mesh, u)
    quad = default_quadrature(mesh, quad)
    phi, wq, _ = _quad_data(mesh, quad)
    uq = u[mesh.cells] @ phi.T
    return float(np.sum(wq * np.abs(uq) ** ps.r) ** (1 / ps.r))


def norm_w1p(mesh: Mesh, u, ps: PStructure, quad: Quadrature | None = None) -> float:
    """||grad u||_{L^p} + ||u||_{L^r}."""
    return seminorm_grad_lp(mesh, u, ps) + norm_lr(mesh, u, ps, quad)

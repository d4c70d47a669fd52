"""Structured P1 meshes, two-subdomain decompositions, discrete trace and lift.

Finite-element functions and interface traces are plain 1-D numpy arrays:
one value per mesh vertex, resp. one value per interface dof in the
canonical interface ordering of a :class:`Decomposition`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

INTERIOR, DIRICHLET, INTERFACE = 0, 1, 2
TAG_NAMES = {INTERIOR: "interior", DIRICHLET: "dirichlet", INTERFACE: "interface"}
GEOM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Mesh:
    """Simplicial mesh: ``points`` (nv, d), ``cells`` (ne, d+1), vertex ``tags`` (nv,)."""

    points: np.ndarray
    cells: np.ndarray
    tags: np.ndarray

    def __post_init__(self):
        pts, cells, tags = self.points, self.cells, self.tags
        if pts.ndim != 2 or pts.shape[1] not in (1, 2):
            raise ValueError("points must have shape (nv, d) with d in {1, 2}")
        if cells.ndim != 2 or cells.shape[1] != pts.shape[1] + 1:
            raise ValueError("cells must have d+1 vertices each")
        if cells.size and (cells.min() < 0 or cells.max() >= len(pts)):
            raise ValueError("connectivity index out of range")
        if tags.shape != (len(pts),):
            raise ValueError("one tag per vertex required")
        if np.any(self.measures <= 0):
            raise ValueError("every element must have positive measure")
        for a in (pts, cells, tags):
            a.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def num_vertices(self) -> int:
        return len(self.points)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @cached_property
    def _jacobians(self) -> np.ndarray:
        x = self.points[self.cells]  # (ne, d+1, d)
        return np.swapaxes(x[:, 1:, :] - x[:, :1, :], 1, 2)  # (ne, d, d)

    @cached_property
    def measures(self) -> np.ndarray:
        det = np.linalg.det(self._jacobians)
        return det / (1.0 if self.dim == 1 else 2.0)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Constant gradients of the local P1 basis, shape (ne, d+1, d)."""
        d = self.dim
        ref = np.vstack([-np.ones((1, d)), np.eye(d)])  # (d+1, d)
        inv_t = np.linalg.inv(self._jacobians).transpose(0, 2, 1)
        return np.einsum("kj,eij->eki", ref, inv_t)

    def dirichlet_mask(self) -> np.ndarray:
        return self.tags == DIRICHLET

    def interface_mask(self) -> np.ndarray:
        return self.tags == INTERFACE


def build_interval_mesh(a: float, b: float, n: int) -> Mesh:
    if not a < b:
        raise ValueError("need a < b")
    if n < 2:
        raise ValueError("need at least 2 elements to host an interface")
    pts = np.linspace(a, b, n + 1)[:, None]
    cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    tags = np.zeros(n + 1, dtype=np.int8)
    tags[[0, n]] = DIRICHLET
    return Mesh(pts, cells, tags)


def build_rect_mesh(lx: float, ly: float, nx: int, ny: int) -> Mesh:
    """Structured triangulation of [0, lx] x [0, ly]; each cell split along its diagonal."""
    if lx <= 0 or ly <= 0:
        raise ValueError("side lengths must be positive")
    if nx < 2 or ny < 2:
        raise ValueError("need nx, ny >= 2")
    xs, ys = np.linspace(0, lx, nx + 1), np.linspace(0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)  # row j = y index
    pts = np.column_stack([X.ravel(), Y.ravel()])
    vid = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    v00, v10 = vid[:-1, :-1].ravel(), vid[:-1, 1:].ravel()
    v01, v11 = vid[1:, :-1].ravel(), vid[1:, 1:].ravel()
    cells = np.vstack([
        np.column_stack([v00, v10, v11]),
        np.column_stack([v00, v11, v01]),
    ])
    tags = np.zeros(len(pts), dtype=np.int8)
    on_bnd = (
        np.isclose(pts[:, 0], 0) | np.isclose(pts[:, 0], lx)
        | np.isclose(pts[:, 1], 0) | np.isclose(pts[:, 1], ly)
    )
    tags[on_bnd] = DIRICHLET
    return Mesh(pts, cells, tags)


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Two nonoverlapping subdomains of ``mesh`` separated by a straight cut.

    ``vertex_maps[i]`` lists the global vertex of each local vertex of
    ``subdomains[i]``; ``iface_local[i]`` and ``iface_global`` give the
    interface dofs in canonical order.  ``normal`` is the outward normal
    of subdomain 1 on the interface; subdomain 2 has the opposite one.
    """

    mesh: Mesh
    subdomains: tuple[Mesh, Mesh]
    vertex_maps: tuple[np.ndarray, np.ndarray]
    cell_maps: tuple[np.ndarray, np.ndarray]
    iface_global: np.ndarray
    iface_local: tuple[np.ndarray, np.ndarray]
    axis: int
    cut: float

    @property
    def num_interface(self) -> int:
        return len(self.iface_global)

    @property
    def normal(self) -> np.ndarray:
        nu = np.zeros(self.mesh.dim)
        nu[self.axis] = 1.0
        return nu

    def normals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.normal, -self.normal

    def sub(self, i: int) -> Mesh:
        return self.subdomains[_side(i)]

    @cached_property
    def interface_points(self) -> np.ndarray:
        return self.mesh.points[self.iface_global]


def _side(i: int) -> int:
    if i not in (1, 2):
        raise ValueError(f"subdomain index must be 1 or 2, got {i}")
    return i - 1


def decompose(mesh: Mesh, axis: str | int = "x", cut: float = 0.5) -> Decomposition:
    """Split ``mesh`` along the line ``{axis} = cut``; subdomain 1 is the lower side."""
    ax = {"x": 0, "y": 1}.get(axis, axis)
    if ax not in range(mesh.dim):
        raise ValueError(f"axis {axis!r} not valid for a {mesh.dim}D mesh")
    coord = mesh.points[:, ax]
    on_line = np.abs(coord - cut) < GEOM_TOL
    if not on_line.any():
        raise ValueError(f"cut {cut} does not coincide with a mesh line")
    cc = coord[mesh.cells]
    below = np.all(cc <= cut + GEOM_TOL, axis=1)
    above = np.all(cc >= cut - GEOM_TOL, axis=1)
    if not np.all(below | above):
        raise ValueError(f"cut {cut} would split elements; it must follow a mesh line")
    if not below.any() or not above.any():
        raise ValueError("both subdomains must be nonempty")

    iface = np.flatnonzero(on_line & (mesh.tags != DIRICHLET))
    if len(iface) == 0:
        raise ValueError("interface has no interior dofs")
    if mesh.dim == 2:
        iface = iface[np.argsort(mesh.points[iface, 1 - ax], kind="stable")]

    subs, vmaps, cmaps, locs = [], [], [], []
    for sel in (below, above):
        cids = np.flatnonzero(sel)
        verts = np.unique(mesh.cells[cids])
        g2l = np.full(mesh.num_vertices, -1)
        g2l[verts] = np.arange(len(verts))
        tags = mesh.tags[verts].copy()
        tags[np.isin(verts, iface)] = INTERFACE
        subs.append(Mesh(mesh.points[verts], g2l[mesh.cells[cids]], tags))
        vmaps.append(verts)
        cmaps.append(cids)
        locs.append(g2l[iface])
    dec = Decomposition(mesh, tuple(subs), tuple(vmaps), tuple(cmaps), iface,
                        tuple(locs), ax, float(cut))
    p1 = subs[0].points[locs[0]]
    p2 = subs[1].points[locs[1]]
    assert np.max(np.abs(p1 - p2)) < GEOM_TOL
    return dec


def trace(dec: Decomposition, i: int, u: np.ndarray) -> np.ndarray:
    """Interface values of a function on subdomain ``i``."""
    sub = dec.sub(i)
    u = np.asarray(u, dtype=float)
    if u.shape != (sub.num_vertices,):
        raise ValueError(f"function has {u.shape} values, subdomain {i} has {sub.num_vertices} vertices")
    return u[dec.iface_local[i - 1]].copy()


def lift(dec: Decomposition, i: int, eta: np.ndarray) -> np.ndarray:
    """Nodal extension by zero of interface data into subdomain ``i``."""
    sub = dec.sub(i)
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (dec.num_interface,):
        raise ValueError(f"trace has shape {eta.shape}, expected ({dec.num_interface},)")
    u = np.zeros(sub.num_vertices)
    u[dec.iface_local[i - 1]] = eta
    return u


def restrict(dec: Decomposition, i: int, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (dec.mesh.num_vertices,):
        raise ValueError("global function has the wrong length")
    return v[dec.vertex_maps[_side(i)]].copy()


def glue(dec: Decomposition, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Assemble a global function; interface values are the mean of both traces."""
    v = np.zeros(dec.mesh.num_vertices)
    v[dec.vertex_maps[0]] = u1
    v[dec.vertex_maps[1]] = u2
    v[dec.iface_global] = 0.5 * (trace(dec, 1, u1) + trace(dec, 2, u2))
    return v


def dump_mesh(mesh: Mesh, path) -> None:
    """Write a plain-text listing of a mesh.

    Format::

        # vertices <nv> dim <d>
        <id> <x> [<y>] <tag-name>
        # cells <ne>
        <id> <v0> <v1> [<v2>]
    """
    with open(path, "w") as fh:
        fh.write(f"# vertices {mesh.num_vertices} dim {mesh.dim}\n")
        for k, (pt, tag) in enumerate(zip(mesh.points, mesh.tags)):
            coords = " ".join(f"{c:.17g}" for c in pt)
            fh.write(f"{k} {coords} {TAG_NAMES[int(tag)]}\n")
        fh.write(f"# cells {mesh.num_cells}\n")
        for k, c in enumerate(mesh.cells):
            fh.write(f"{k} " + " ".join(str(int(v)) for v in c) + "\n")

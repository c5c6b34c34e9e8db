"""Uniform rectangular meshes and Taylor--Hood Q2-Q1 dof maps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class StructuredMesh:
    """Uniform ``nx`` x ``ny`` grid of pressure cells on ``[ax, bx] x [ay, by]``.

    Level ``l`` uses ``2**l`` cells per direction, so on the unit square the
    pressure mesh size is ``2**-l`` and the velocity nodal spacing ``2**(-1-l)``.
    """

    ax: float
    bx: float
    ay: float
    by: float
    level: int
    nx: int
    ny: int

    @property
    def hx(self) -> float:
        return (self.bx - self.ax) / self.nx

    @property
    def hy(self) -> float:
        return (self.by - self.ay) / self.ny

    @property
    def h_p(self) -> float:
        return max(self.hx, self.hy)

    @property
    def h_u(self) -> float:
        return 0.5 * self.h_p

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def area(self) -> float:
        return (self.bx - self.ax) * (self.by - self.ay)


@dataclass(eq=False)
class FESpaces:
    """Dof layout of vector Q2 velocity and scalar Q1 pressure.

    Velocity dofs are ``comp * n_vnodes + node`` with nodes numbered
    lexicographically (x fastest) on the ``(2nx+1) x (2ny+1)`` grid.
    """

    mesh: StructuredMesh
    vnode_x: np.ndarray
    vnode_y: np.ndarray
    pnode_x: np.ndarray
    pnode_y: np.ndarray
    cell_vnodes: np.ndarray  # (n_cells, 9)
    cell_pnodes: np.ndarray  # (n_cells, 4)
    cell_origin: np.ndarray  # (n_cells, 2) lower-left corner
    boundary_sets: dict = field(default_factory=dict)

    @property
    def n_vnodes(self) -> int:
        return len(self.vnode_x)

    @property
    def n_u(self) -> int:
        return 2 * self.n_vnodes

    @property
    def n_p(self) -> int:
        return len(self.pnode_x)

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.sort(np.concatenate(list(self.boundary_sets.values())))

    @property
    def boundary_dofs(self) -> np.ndarray:
        nodes = self.boundary_nodes
        return np.concatenate([nodes, nodes + self.n_vnodes])

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_u, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.flatnonzero(mask)

    def cell_vdofs(self, comp: int) -> np.ndarray:
        return self.cell_vnodes + comp * self.n_vnodes

    def dof_count(self, stages: int = 1) -> int:
        """Unknowns of one Newton system: free velocity plus all pressure dofs, per stage."""
        return stages * (len(self.free_dofs) + self.n_p)


def build_mesh(domain=((0.0, 1.0), (0.0, 1.0)), level: int = 2):
    """Return ``(mesh, spaces)`` for refinement ``level`` on the rectangle ``domain``."""
    if level < 1:
        raise ValueError("level must be >= 1")
    (ax, bx), (ay, by) = domain
    n = 2**level
    mesh = StructuredMesh(float(ax), float(bx), float(ay), float(by), int(level), n, n)
    return mesh, build_spaces(mesh)


def build_spaces(mesh: StructuredMesh) -> FESpaces:
    nx, ny = mesh.nx, mesh.ny
    mvx, mvy = 2 * nx + 1, 2 * ny + 1
    xs = np.linspace(mesh.ax, mesh.bx, mvx)
    ys = np.linspace(mesh.ay, mesh.by, mvy)
    VX, VY = np.meshgrid(xs, ys, indexing="xy")
    PX, PY = np.meshgrid(xs[::2], ys[::2], indexing="xy")

    ci, cj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ci, cj = ci.ravel(), cj.ravel()
    a, b = np.meshgrid(np.arange(3), np.arange(3), indexing="xy")
    a, b = a.ravel(), b.ravel()
    cell_vnodes = (2 * cj[:, None] + b[None, :]) * mvx + 2 * ci[:, None] + a[None, :]
    a1, b1 = np.meshgrid(np.arange(2), np.arange(2), indexing="xy")
    a1, b1 = a1.ravel(), b1.ravel()
    cell_pnodes = (cj[:, None] + b1[None, :]) * (nx + 1) + ci[:, None] + a1[None, :]
    origin = np.column_stack([mesh.ax + ci * mesh.hx, mesh.ay + cj * mesh.hy])

    I, J = np.meshgrid(np.arange(mvx), np.arange(mvy), indexing="xy")
    I, J = I.ravel(), J.ravel()
    inner_j = (J > 0) & (J < mvy - 1)
    sets = {
        "bottom": np.flatnonzero(J == 0),
        "top": np.flatnonzero(J == mvy - 1),
        "left": np.flatnonzero((I == 0) & inner_j),
        "right": np.flatnonzero((I == mvx - 1) & inner_j),
    }
    return FESpaces(
        mesh=mesh,
        vnode_x=VX.ravel(),
        vnode_y=VY.ravel(),
        pnode_x=PX.ravel(),
        pnode_y=PY.ravel(),
        cell_vnodes=cell_vnodes,
        cell_pnodes=cell_pnodes,
        cell_origin=origin,
        boundary_sets=sets,
    )

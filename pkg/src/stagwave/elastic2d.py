"""Plane-strain staggered-grid discretisation on a uniform rectangle.

Velocities are piecewise constant per cell (two components at each cell
center), stresses live at the (nx+1) x (ny+1) nodes as symmetric tensors
(xx, yy, xy), and each adhesive boundary segment carries a two-component
boundary proto-stress.  The strain operator averages the four cell values
adjacent to a node and differences them over 2h (the rotated-staggered
stencil); its adjoint is the exact transpose under the lumped node
quadrature, which makes adjoint consistency and discrete momentum
conservation hold to rounding by construction.

Boundary nodes use the cells that exist: tangential averages shrink to
one cell and a derivative with no cell pair across the node is dropped.
Prescribed boundary tractions enter weakly as h-scaled forces on the
adjacent cells (assembled into the load program); adhesive segments
couple through the trace block of the strain operator with the segment
stiffness matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .integrator import LoadProgram

Vec2 = tuple[float, float]


@dataclass(frozen=True)
class MaterialParams:
    """Homogeneous isotropic material (bulk modulus, shear modulus, density)."""

    bulk_modulus: float
    shear_modulus: float
    density: float

    def __post_init__(self):
        if self.bulk_modulus <= 0 or self.shear_modulus <= 0 or self.density <= 0:
            raise ConfigError(
                "material constants must be positive, got "
                f"K={self.bulk_modulus}, G={self.shear_modulus}, rho={self.density}"
            )

    @property
    def lam(self) -> float:
        """First Lame constant for plane strain, K - 2G/3."""
        return self.bulk_modulus - 2.0 * self.shear_modulus / 3.0

    @property
    def v_p(self) -> float:
        return np.sqrt((self.bulk_modulus + 4.0 * self.shear_modulus / 3.0) / self.density)

    @property
    def v_s(self) -> float:
        return np.sqrt(self.shear_modulus / self.density)


def wave_speeds(material: MaterialParams) -> tuple[float, float]:
    """Pressure and shear wave speeds (v_p, v_s)."""
    return float(material.v_p), float(material.v_s)


@dataclass(frozen=True)
class Grid2D:
    """Uniform cell grid; velocity DOFs at cell centers, stress at nodes."""

    nx: int
    ny: int
    h: float
    origin: Vec2 = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ConfigError(f"grid needs nx, ny >= 2, got {self.nx} x {self.ny}")
        if self.h <= 0:
            raise ConfigError(f"mesh size must be positive, got {self.h}")

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.ny + 1, self.nx + 1)

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.origin[0] + self.h * np.arange(self.nx + 1)
        y = self.origin[1] + self.h * np.arange(self.ny + 1)
        return np.meshgrid(x, y)

    def cell_coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.origin[0] + self.h * (np.arange(self.nx) + 0.5)
        y = self.origin[1] + self.h * (np.arange(self.ny) + 0.5)
        return np.meshgrid(x, y)


@dataclass(frozen=True)
class TractionPatch:
    """Prescribed traction g(t) on ``count`` consecutive boundary segments.

    ``side`` is one of top/bottom/left/right, ``start`` the first cell
    index along that side.  The traction is applied as an h-scaled force
    on the adjacent boundary cells.
    """

    side: str
    start: int
    count: int
    g: Callable[[float], Vec2]


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary conditions: adhesive band plus traction patches.

    Every segment not listed is traction free.  ``adhesive_cells`` are
    bottom-row cell indices forming a contiguous band; their order fixes
    the segment indexing of the adhesive proto-stress and damage arrays.
    """

    adhesive_cells: tuple[int, ...] = ()
    tractions: tuple[TractionPatch, ...] = ()

    def __post_init__(self):
        cells = self.adhesive_cells
        if cells and any(b - a != 1 for a, b in zip(cells, cells[1:])):
            raise ConfigError("adhesive segments must form a contiguous band")


# Tangential averaging of cell values onto node-aligned rows/columns and
# the edge-zeroed node differences; each *_t function is the exact
# transpose of its forward partner.


def _mean_rows(c: np.ndarray) -> np.ndarray:
    out = np.empty((c.shape[0] + 1, c.shape[1]))
    out[0] = c[0]
    out[-1] = c[-1]
    out[1:-1] = 0.5 * (c[:-1] + c[1:])
    return out


def _mean_rows_t(r: np.ndarray) -> np.ndarray:
    out = 0.5 * (r[:-1] + r[1:])
    out[0] += 0.5 * r[0]
    out[-1] += 0.5 * r[-1]
    return out


def _mean_cols(c: np.ndarray) -> np.ndarray:
    out = np.empty((c.shape[0], c.shape[1] + 1))
    out[:, 0] = c[:, 0]
    out[:, -1] = c[:, -1]
    out[:, 1:-1] = 0.5 * (c[:, :-1] + c[:, 1:])
    return out


def _mean_cols_t(r: np.ndarray) -> np.ndarray:
    out = 0.5 * (r[:, :-1] + r[:, 1:])
    out[:, 0] += 0.5 * r[:, 0]
    out[:, -1] += 0.5 * r[:, -1]
    return out


def _diff_x(r: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros((r.shape[0], r.shape[1] + 1))
    out[:, 1:-1] = (r[:, 1:] - r[:, :-1]) / h
    return out


def _diff_x_t(t: np.ndarray, h: float) -> np.ndarray:
    u = t.copy()
    u[:, 0] = 0.0
    u[:, -1] = 0.0
    return (u[:, :-1] - u[:, 1:]) / h


def _diff_y(c: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros((c.shape[0] + 1, c.shape[1]))
    out[1:-1] = (c[1:] - c[:-1]) / h
    return out


def _diff_y_t(t: np.ndarray, h: float) -> np.ndarray:
    u = t.copy()
    u[0] = 0.0
    u[-1] = 0.0
    return (u[:-1] - u[1:]) / h


def _node_weights(grid: Grid2D) -> np.ndarray:
    w = np.full(grid.node_shape, grid.h * grid.h)
    w[0, :] *= 0.5
    w[-1, :] *= 0.5
    w[:, 0] *= 0.5
    w[:, -1] *= 0.5
    return w


class PlaneStrainStaggeredOps:
    """Operator bundle for the staggered plane-strain discretisation.

    Flat DOF layout: H vectors are (2, ny, nx) raveled (vx plane then vy
    plane); S vectors are the (3, ny+1, nx+1) node tensor followed by the
    (2, n_seg) adhesive block.
    """

    def __init__(
        self,
        grid: Grid2D,
        material: MaterialParams,
        boundary: Optional[BoundarySpec] = None,
        adhesive_stiffness: Optional[np.ndarray] = None,
        load_program: Optional[LoadProgram] = None,
    ):
        self.grid = grid
        self.material = material
        self.boundary = boundary or BoundarySpec()
        self.adhesive_cells = np.asarray(self.boundary.adhesive_cells, dtype=int)
        if self.adhesive_cells.size and (
            self.adhesive_cells.min() < 0 or self.adhesive_cells.max() >= grid.nx
        ):
            raise ConfigError("adhesive segment indices outside the bottom side")
        self.n_seg = int(self.adhesive_cells.size)
        if self.n_seg:
            if adhesive_stiffness is None:
                raise ConfigError("adhesive segments need a stiffness matrix")
            b = np.asarray(adhesive_stiffness, dtype=float)
            if b.shape != (2, 2) or not np.allclose(b, b.T):
                raise ConfigError("adhesive stiffness must be a symmetric 2x2 matrix")
            if np.linalg.eigvalsh(b).min() <= 0:
                raise ConfigError("adhesive stiffness must be positive definite")
            self.b_matrix = b
            self.b_inverse = np.linalg.inv(b)
        else:
            self.b_matrix = np.zeros((2, 2))
            self.b_inverse = np.zeros((2, 2))
        self.node_weights = _node_weights(grid)
        self.mass = material.density * grid.h * grid.h  # lumped, per cell DOF
        self.dim_h = 2 * grid.n_cells
        self.dim_bulk = 3 * (grid.nx + 1) * (grid.ny + 1)
        self.dim_s = self.dim_bulk + 2 * self.n_seg
        self.program = load_program

        lam, g = material.lam, material.shear_modulus
        a = lam + 2.0 * g
        det = a * a - lam * lam
        self._c = (a, lam, 2.0 * g)
        self._c_inv = (a / det, -lam / det, 0.5 / g)

    # -- layout ------------------------------------------------------------

    def split_h(self, v: np.ndarray) -> np.ndarray:
        return v.reshape(2, self.grid.ny, self.grid.nx)

    def split_s(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ny1, nx1 = self.grid.node_shape
        bulk = s[: self.dim_bulk].reshape(3, ny1, nx1)
        adh = s[self.dim_bulk :].reshape(2, self.n_seg)
        return bulk, adh

    def join_s(self, bulk: np.ndarray, adh: Optional[np.ndarray] = None) -> np.ndarray:
        out = np.empty(self.dim_s)
        out[: self.dim_bulk] = bulk.ravel()
        if self.n_seg:
            out[self.dim_bulk :] = np.zeros(2 * self.n_seg) if adh is None else adh.ravel()
        return out

    def zeros_h(self) -> np.ndarray:
        return np.zeros(self.dim_h)

    def zeros_s(self) -> np.ndarray:
        return np.zeros(self.dim_s)

    # -- core operators ------------------------------------------------------

    def apply_E(self, v: np.ndarray) -> np.ndarray:
        vx, vy = self.split_h(v)
        h = self.grid.h
        exx = _diff_x(_mean_rows(vx), h)
        eyy = _diff_y(_mean_cols(vy), h)
        exy = 0.5 * (_diff_y(_mean_cols(vx), h) + _diff_x(_mean_rows(vy), h))
        out = np.empty(self.dim_s)
        ny1, nx1 = self.grid.node_shape
        bulk = out[: self.dim_bulk].reshape(3, ny1, nx1)
        bulk[0] = exx
        bulk[1] = eyy
        bulk[2] = exy
        if self.n_seg:
            adh = out[self.dim_bulk :].reshape(2, self.n_seg)
            adh[0] = -vx[0, self.adhesive_cells]
            adh[1] = -vy[0, self.adhesive_cells]
        return out

    def apply_E_adjoint(self, s: np.ndarray) -> np.ndarray:
        bulk, adh = self.split_s(s)
        w = self.node_weights
        h = self.grid.h
        fx = _mean_rows_t(_diff_x_t(w * bulk[0], h)) + _mean_cols_t(_diff_y_t(w * bulk[2], h))
        fy = _mean_cols_t(_diff_y_t(w * bulk[1], h)) + _mean_rows_t(_diff_x_t(w * bulk[2], h))
        if self.n_seg:
            np.add.at(fx[0], self.adhesive_cells, -h * adh[0])
            np.add.at(fy[0], self.adhesive_cells, -h * adh[1])
        out = np.empty(self.dim_h)
        fv = out.reshape(2, self.grid.ny, self.grid.nx)
        fv[0] = fx
        fv[1] = fy
        return out

    def apply_C(self, e: np.ndarray) -> np.ndarray:
        bulk, adh = self.split_s(e)
        a, lam, g2 = self._c
        out = np.empty(self.dim_s)
        sb, sa = self.split_s(out)
        sb[0] = a * bulk[0] + lam * bulk[1]
        sb[1] = lam * bulk[0] + a * bulk[1]
        sb[2] = g2 * bulk[2]
        if self.n_seg:
            sa[...] = self.b_matrix @ adh
        return out

    # The generalized elasticity tensor is symmetric, so its adjoint under
    # the tensor pairing is itself.
    apply_C_adjoint = apply_C

    def apply_C_inverse(self, s: np.ndarray) -> np.ndarray:
        bulk, adh = self.split_s(s)
        ia, ib, ig = self._c_inv
        out = np.empty(self.dim_s)
        eb, ea = self.split_s(out)
        eb[0] = ia * bulk[0] + ib * bulk[1]
        eb[1] = ib * bulk[0] + ia * bulk[1]
        eb[2] = ig * bulk[2]
        if self.n_seg:
            ea[...] = self.b_inverse @ adh
        return out

    def apply_mass_inverse(self, f: np.ndarray) -> np.ndarray:
        return f / self.mass

    def mass_pair(self, v: np.ndarray, w: np.ndarray) -> float:
        return self.mass * float(v @ w)

    def s_pair(self, a: np.ndarray, b: np.ndarray) -> float:
        ab, aa = self.split_s(a)
        bb, ba = self.split_s(b)
        acc = float(
            np.sum(self.node_weights * (ab[0] * bb[0] + ab[1] * bb[1] + 2.0 * ab[2] * bb[2]))
        )
        if self.n_seg:
            acc += self.grid.h * float(np.sum(aa * ba))
        return acc

    def load_F(self, t: float) -> Optional[np.ndarray]:
        return self.program.eval_F(t) if self.program is not None else None

    def load_Gdot(self, t: float) -> Optional[np.ndarray]:
        if self.program is None or self.program.G is None:
            return None
        # Ġ via a centered difference narrow enough for the loads used here.
        dt = 1e-6
        lo = max(t - dt, 0.0)
        return (self.program.eval_G(t + dt) - self.program.eval_G(lo)) / (t + dt - lo)

    # -- diagnostics -----------------------------------------------------------

    def momentum(self, v: np.ndarray) -> np.ndarray:
        vx, vy = self.split_h(v)
        return self.mass * np.array([vx.sum(), vy.sum()])

    def kinetic_energy(self, v: np.ndarray) -> float:
        return 0.5 * self.mass_pair(v, v)

    def helmholtz(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nodal divergence and rotation of the cell velocity field."""
        vx, vy = self.split_h(v)
        h = self.grid.h
        div = _diff_x(_mean_rows(vx), h) + _diff_y(_mean_cols(vy), h)
        rot = _diff_x(_mean_rows(vy), h) - _diff_y(_mean_cols(vx), h)
        return div, rot

    def node_velocity(self, v: np.ndarray) -> np.ndarray:
        """Velocity resampled to nodes by averaging the adjacent cells."""
        vx, vy = self.split_h(v)
        return np.stack([_mean_cols(_mean_rows(vx)), _mean_cols(_mean_rows(vy))])

    def adhesive_rate(self, v: np.ndarray, ud_dot: Optional[np.ndarray] = None) -> np.ndarray:
        """Proto-stress rate of the adhesive segments, B (u̇_D - v|_Gamma).

        The boundary trace of the cellwise velocity is the adjacent bottom
        cell's value.
        """
        vx, vy = self.split_h(v)
        trace = np.stack([vx[0, self.adhesive_cells], vy[0, self.adhesive_cells]])
        rel = -trace if ud_dot is None else ud_dot - trace
        return self.b_matrix @ rel


_SIDES = ("bottom", "top", "left", "right")


def assemble_load_program(
    grid: Grid2D,
    boundary: BoundarySpec,
    t_final: Optional[float] = None,
    bulk_force: Optional[Callable[[float], np.ndarray]] = None,
) -> LoadProgram:
    """Build the load program from the boundary tractions (weak enforcement).

    Each traction patch contributes g(t) * h to its adjacent boundary
    cells.  Adhesive support displacement is held at zero, so G vanishes.
    """
    n_cells = grid.n_cells
    patches = []
    for patch in boundary.tractions:
        if patch.side not in _SIDES:
            raise ConfigError(f"unknown boundary side {patch.side!r}")
        along = grid.nx if patch.side in ("bottom", "top") else grid.ny
        if patch.start < 0 or patch.start + patch.count > along:
            raise ConfigError(
                f"traction patch [{patch.start}, {patch.start + patch.count}) "
                f"outside side {patch.side!r} of length {along}"
            )
        idx = np.arange(patch.start, patch.start + patch.count)
        if patch.side == "bottom":
            rows, cols = np.zeros_like(idx), idx
        elif patch.side == "top":
            rows, cols = np.full_like(idx, grid.ny - 1), idx
        elif patch.side == "left":
            rows, cols = idx, np.zeros_like(idx)
        else:
            rows, cols = idx, np.full_like(idx, grid.nx - 1)
        patches.append((rows, cols, patch.g))
    if not patches and bulk_force is None:
        return LoadProgram(dim_h=2 * n_cells, t_final=t_final)

    def f_of_t(t: float) -> np.ndarray:
        out = np.zeros(2 * n_cells)
        fx = out[:n_cells].reshape(grid.ny, grid.nx)
        fy = out[n_cells:].reshape(grid.ny, grid.nx)
        for rows, cols, g in patches:
            gx, gy = g(t)
            np.add.at(fx, (rows, cols), grid.h * gx)
            np.add.at(fy, (rows, cols), grid.h * gy)
        if bulk_force is not None:
            out += bulk_force(t)
        return out

    return LoadProgram(F=f_of_t, dim_h=2 * n_cells, t_final=t_final)

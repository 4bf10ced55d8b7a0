"""CSV / VTK snapshot writers, the adhesive trace recorder and run manifests.

All text outputs are deterministic: fixed column orders, fixed float
formatting (%.17g round-trips doubles exactly), one row per record.
Rows report the level values at each step, i.e. the right-continuous
piecewise-constant interpolant of every discrete trajectory; the affine
interpolant can be reconstructed from consecutive rows and is not stored.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .elastic2d import PlaneStrainStaggeredOps
from .integrator import EnergyLedger, StaggeredState

ENERGY_COLUMNS = (
    "k",
    "t",
    "twisted_kinetic",
    "stored",
    "dissipated_cum",
    "work_cum",
    "a_coeff",
    "imbalance",
)


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_energy_csv(path: str, rows: Sequence[EnergyLedger]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(ENERGY_COLUMNS) + "\n")
        for r in rows:
            fh.write(
                f"{r.k},{_fmt(r.t)},{_fmt(r.twisted_kinetic)},{_fmt(r.stored)},"
                f"{_fmt(r.dissipated_cum)},{_fmt(r.work_cum)},{_fmt(r.a_coeff)},"
                f"{_fmt(r.imbalance)}\n"
            )


def read_energy_csv(path: str) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def snapshot_fields(
    ops: PlaneStrainStaggeredOps, state: StaggeredState
) -> dict[str, np.ndarray]:
    """Node-resampled snapshot fields: |v|, div v and rot v."""
    vn = ops.node_velocity(state.v)
    div, rot = ops.helmholtz(state.v)
    x, y = ops.grid.node_coords()
    return {
        "x": x,
        "y": y,
        "vnorm": np.sqrt(vn[0] ** 2 + vn[1] ** 2),
        "divv": div,
        "rotv": rot,
    }


def write_snapshot_csv(path: str, ops: PlaneStrainStaggeredOps, state: StaggeredState) -> None:
    f = snapshot_fields(ops, state)
    cols = [f["x"].ravel(), f["y"].ravel(), f["vnorm"].ravel(), f["divv"].ravel(), f["rotv"].ravel()]
    with open(path, "w") as fh:
        fh.write("x,y,vnorm,divv,rotv\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_snapshot_vti(path: str, ops: PlaneStrainStaggeredOps, state: StaggeredState) -> None:
    """ASCII ImageData with the three snapshot scalar fields as point data."""
    f = snapshot_fields(ops, state)
    grid = ops.grid
    ox, oy = grid.origin
    with open(path, "w") as fh:
        fh.write('<?xml version="1.0"?>\n')
        fh.write('<VTKFile type="ImageData" version="0.1" byte_order="LittleEndian">\n')
        fh.write(
            f'  <ImageData WholeExtent="0 {grid.nx} 0 {grid.ny} 0 0" '
            f'Origin="{_fmt(ox)} {_fmt(oy)} 0" Spacing="{_fmt(grid.h)} {_fmt(grid.h)} 1">\n'
        )
        fh.write(f'    <Piece Extent="0 {grid.nx} 0 {grid.ny} 0 0">\n')
        fh.write('      <PointData Scalars="vnorm">\n')
        for name in ("vnorm", "divv", "rotv"):
            fh.write(f'        <DataArray type="Float64" Name="{name}" format="ascii">\n')
            fh.write("          " + " ".join(_fmt(v) for v in f[name].ravel()) + "\n")
            fh.write("        </DataArray>\n")
        fh.write("      </PointData>\n    </Piece>\n  </ImageData>\n</VTKFile>\n")


@dataclass
class AlphaRow:
    t: float
    segment_index: int
    alpha: float
    sigma_x: float
    sigma_y: float


class AlphaRecorder:
    """Run monitor recording the adhesive state whenever damage evolves.

    Rows are appended for every segment at each step where any damage
    value changed (and at the explicitly requested step indices), so the
    trace pinpoints rupture times at step resolution without logging
    quiescent steps.
    """

    def __init__(self, ops: PlaneStrainStaggeredOps, extra_steps: Iterable[int] = ()):
        self.ops = ops
        self.extra_steps = set(extra_steps)
        self.rows: list[AlphaRow] = []
        self.first_rupture_t: Optional[float] = None
        self._last_alpha: Optional[np.ndarray] = None

    def __call__(self, state: StaggeredState, row=None) -> None:
        alpha = state.z
        changed = self._last_alpha is None or not np.array_equal(alpha, self._last_alpha)
        if self.first_rupture_t is None and np.any(alpha <= 0.0):
            self.first_rupture_t = state.t
        if changed or state.k in self.extra_steps:
            _, adh = self.ops.split_s(state.sigma)
            for idx in range(alpha.size):
                self.rows.append(
                    AlphaRow(state.t, idx, float(alpha[idx]), float(adh[0, idx]), float(adh[1, idx]))
                )
            self._last_alpha = alpha.copy()

    @property
    def ruptured_count(self) -> int:
        return 0 if self._last_alpha is None else int(np.sum(self._last_alpha <= 0.0))

    @property
    def damaged_count(self) -> int:
        return 0 if self._last_alpha is None else int(np.sum(self._last_alpha < 1.0))


def write_alpha_csv(path: str, rows: Sequence[AlphaRow]) -> None:
    with open(path, "w") as fh:
        fh.write("t,segment_index,alpha,sigma_x,sigma_y\n")
        for r in rows:
            fh.write(
                f"{_fmt(r.t)},{r.segment_index},{_fmt(r.alpha)},"
                f"{_fmt(r.sigma_x)},{_fmt(r.sigma_y)}\n"
            )


def write_manifest(path: str, entries: dict) -> None:
    """Flat key=value text file, insertion ordered."""
    with open(path, "w") as fh:
        for key, value in entries.items():
            if isinstance(value, float):
                value = _fmt(value)
            fh.write(f"{key}={value}\n")


def read_manifest(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                key, _, value = line.partition("=")
                out[key] = value
    return out


def ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)

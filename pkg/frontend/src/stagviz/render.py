"""Figure rendering from simulator CSV outputs.

Consumes the simulator's external file formats only: snapshot CSVs
(x, y, vnorm, divv, rotv on the node grid), the energy ledger CSV and
the adhesive trace CSV.  Rendering never modifies its inputs.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


class MalformedInput(ValueError):
    """The input file does not match the expected CSV schema."""


SNAPSHOT_COLUMNS = ("x", "y", "vnorm", "divv", "rotv")
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
ALPHA_COLUMNS = ("t", "segment_index", "alpha", "sigma_x", "sigma_y")


def _read_csv(path, expected_columns):
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except (OSError, ValueError) as err:
        raise MalformedInput(f"cannot parse {path}: {err}") from err
    if data.dtype.names is None or tuple(data.dtype.names) != expected_columns:
        raise MalformedInput(
            f"{path}: expected columns {expected_columns}, got {data.dtype.names}"
        )
    table = {name: np.atleast_1d(data[name]) for name in expected_columns}
    for name, col in table.items():
        if not np.all(np.isfinite(col)):
            raise MalformedInput(f"{path}: non-finite values in column {name}")
    return table


def load_snapshot(path):
    """Snapshot table reshaped onto its (ny+1) x (nx+1) node grid."""
    table = _read_csv(path, SNAPSHOT_COLUMNS)
    xs = np.unique(table["x"])
    ys = np.unique(table["y"])
    if xs.size * ys.size != table["x"].size:
        raise MalformedInput(f"{path}: rows do not fill a rectangular node grid")
    shape = (ys.size, xs.size)
    fields = {name: table[name].reshape(shape) for name in ("vnorm", "divv", "rotv")}
    return xs, ys, fields


def render_snapshot(csv_path, png_path):
    """Three aligned field panels with per-panel symmetric color scales.

    Prints the row's field maxima so wave-type dominance can be checked
    from the console; returns them as a dict as well.
    """
    xs, ys, fields = load_snapshot(csv_path)
    extent = (xs[0], xs[-1], ys[0], ys[-1])
    fig, axes = plt.subplots(1, 3, figsize=(13.5, 4.2), sharex=True, sharey=True)
    titles = ("|v|", "div v", "rot v")
    maxima = {}
    for ax, name, title in zip(axes, ("vnorm", "divv", "rotv"), titles):
        field = fields[name]
        peak = float(np.abs(field).max())
        maxima[name] = peak
        scale = peak if peak > 0 else 1.0
        if name == "vnorm":
            im = ax.imshow(field, origin="lower", extent=extent, cmap="magma", vmin=0.0, vmax=scale)
        else:
            im = ax.imshow(
                field, origin="lower", extent=extent, cmap="seismic", vmin=-scale, vmax=scale
            )
        ax.set_title(title)
        ax.set_xlabel("x")
        fig.colorbar(im, ax=ax, shrink=0.85)
    axes[0].set_ylabel("y")
    fig.tight_layout()
    fig.savefig(png_path, dpi=130)
    plt.close(fig)
    print(
        f"max |v| = {maxima['vnorm']:.6g}, max |div v| = {maxima['divv']:.6g}, "
        f"max |rot v| = {maxima['rotv']:.6g}"
    )
    return maxima


def render_energy(csv_path, png_path):
    """Energy-ledger traces plus the balance residual on a second axis."""
    table = _read_csv(csv_path, ENERGY_COLUMNS)
    t = table["t"]
    fig, ax = plt.subplots(figsize=(8.5, 4.5))
    for name, style in (
        ("twisted_kinetic", "-"),
        ("stored", "-"),
        ("dissipated_cum", "--"),
        ("work_cum", ":"),
    ):
        ax.plot(t, table[name], style, label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend(loc="upper left", fontsize=8)
    ax2 = ax.twinx()
    ax2.plot(t, table["imbalance"], color="crimson", lw=0.7, alpha=0.7)
    ax2.set_ylabel("imbalance", color="crimson")
    fig.tight_layout()
    fig.savefig(png_path, dpi=130)
    plt.close(fig)


def render_alpha(csv_path, png_path):
    """Damage timeline of every adhesive segment."""
    table = _read_csv(csv_path, ALPHA_COLUMNS)
    segments = np.unique(table["segment_index"]).astype(int)
    fig, ax = plt.subplots(figsize=(8.5, 4.5))
    cmap = plt.get_cmap("viridis")
    for seg in segments:
        mask = table["segment_index"] == seg
        color = cmap(seg / max(segments.max(), 1))
        ax.step(table["t"][mask], table["alpha"][mask], where="post", color=color, lw=0.9)
    ax.set_xlabel("t")
    ax.set_ylabel("alpha")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(f"{segments.size} adhesive segments")
    fig.tight_layout()
    fig.savefig(png_path, dpi=130)
    plt.close(fig)

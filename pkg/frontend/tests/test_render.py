from __future__ import annotations

import hashlib
import os

import numpy as np
import pytest

from stagviz import MalformedInput, load_snapshot, render_alpha, render_energy, render_snapshot
from stagviz.cli import main


def _write_snapshot_csv(path, nx=6, ny=4, fill=0.0, rot_scale=1.0, div_scale=1.0):
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 0.8, ny + 1)
    with open(path, "w") as fh:
        fh.write("x,y,vnorm,divv,rotv\n")
        for y in ys:
            for x in xs:
                v = fill + 0.1 * np.sin(3 * x) * np.cos(2 * y)
                fh.write(
                    f"{x},{y},{abs(v)},{div_scale * v},{rot_scale * (v + 0.05)}\n"
                )


def _write_energy_csv(path, n=20):
    with open(path, "w") as fh:
        fh.write("k,t,twisted_kinetic,stored,dissipated_cum,work_cum,a_coeff,imbalance\n")
        for k in range(1, n + 1):
            t = 0.1 * k
            fh.write(f"{k},{t},{0.5 + 0.01 * k},{0.2},{0.001 * k},{0.01 * k},0.9,1e-15\n")


def _write_alpha_csv(path):
    with open(path, "w") as fh:
        fh.write("t,segment_index,alpha,sigma_x,sigma_y\n")
        for t, a0, a1 in ((0.0, 1.0, 1.0), (1.0, 0.5, 1.0), (2.0, 0.0, 0.8)):
            fh.write(f"{t},0,{a0},0.0,0.001\n")
            fh.write(f"{t},1,{a1},0.0,0.002\n")


def _digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def test_render_snapshot_writes_png_and_keeps_input(tmp_path):
    csv = tmp_path / "snap.csv"
    png = tmp_path / "snap.png"
    _write_snapshot_csv(csv)
    before = _digest(csv)
    maxima = render_snapshot(str(csv), str(png))
    assert png.exists() and png.stat().st_size > 1000
    assert _digest(csv) == before
    assert set(maxima) == {"vnorm", "divv", "rotv"}


def test_quiescent_snapshot_renders_uniform_panels(tmp_path, capsys):
    csv = tmp_path / "flat.csv"
    png = tmp_path / "flat.png"
    xs = np.linspace(0, 1, 5)
    ys = np.linspace(0, 1, 5)
    with open(csv, "w") as fh:
        fh.write("x,y,vnorm,divv,rotv\n")
        for y in ys:
            for x in xs:
                fh.write(f"{x},{y},0.0,0.0,0.0\n")
    maxima = render_snapshot(str(csv), str(png))
    assert png.exists()
    assert maxima == {"vnorm": 0.0, "divv": 0.0, "rotv": 0.0}
    assert "max |div v| = 0" in capsys.readouterr().out


def test_load_snapshot_grid_shape(tmp_path):
    csv = tmp_path / "snap.csv"
    _write_snapshot_csv(csv, nx=6, ny=4)
    xs, ys, fields = load_snapshot(str(csv))
    assert xs.shape == (7,) and ys.shape == (5,)
    assert fields["divv"].shape == (5, 7)


@pytest.mark.parametrize(
    "content",
    [
        "x,y,vnorm\n0,0,1\n",  # wrong columns
        "x,y,vnorm,divv,rotv\n0,0,1,nan,0\n",  # non-finite
        "not,a,csv,at,all\njunk\n",
    ],
)
def test_malformed_snapshot_is_rejected(tmp_path, content):
    csv = tmp_path / "bad.csv"
    csv.write_text(content)
    with pytest.raises(MalformedInput):
        render_snapshot(str(csv), str(tmp_path / "bad.png"))
    assert main(["render-snapshot", str(csv), str(tmp_path / "bad.png")]) == 2


def test_render_energy(tmp_path):
    csv = tmp_path / "energy.csv"
    png = tmp_path / "energy.png"
    _write_energy_csv(csv)
    before = _digest(csv)
    assert main(["render-energy", str(csv), str(png)]) == 0
    assert png.exists() and png.stat().st_size > 1000
    assert _digest(csv) == before


def test_render_alpha(tmp_path):
    csv = tmp_path / "alpha.csv"
    png = tmp_path / "alpha.png"
    _write_alpha_csv(csv)
    assert main(["render-alpha", str(csv), str(png)]) == 0
    assert png.exists() and png.stat().st_size > 1000


def test_cli_unknown_command_exits_2(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["render-everything", "a", "b"])
    assert info.value.code == 2

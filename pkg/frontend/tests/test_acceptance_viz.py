"""Secondary acceptance: render the simulator's delamination outputs.

Uses the full-resolution artifacts produced by the simulator's acceptance
suite when they exist (test_artifacts/mode_I_full at the repository
root); otherwise falls back to generating desk-scale outputs through the
simulator CLI.  The shear-ramp dominance check always runs on a freshly
generated desk-scale snapshot taken after rupture.
"""

from __future__ import annotations

import os
import subprocess
import sys

import pytest

from stagviz import render_energy, render_snapshot

REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
FULL_DIR = os.path.join(REPO_ROOT, "test_artifacts", "mode_I_full")


def _run_simulator(args):
    result = subprocess.run(
        [sys.executable, "-m", "stagwave.cli"] + args, capture_output=True, text=True
    )
    assert result.returncode == 0, result.stderr
    return result


def _desk_mode_i(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("mode_I_desk"))
    _run_simulator(
        ["run", "--preset", "mode_I", "--desk", "--out", out, "--duration", "24.0", "--snapshots", "23.0"]
    )
    snaps = sorted(f for f in os.listdir(out) if f.startswith("snapshot_") and f.endswith(".csv"))
    return out, os.path.join(out, snaps[0])


@pytest.fixture(scope="module")
def mode_i_outputs(tmp_path_factory):
    if os.path.isdir(FULL_DIR):
        snaps = sorted(
            f for f in os.listdir(FULL_DIR) if f.startswith("snapshot_") and f.endswith(".csv")
        )
        if snaps and os.path.exists(os.path.join(FULL_DIR, "energy.csv")):
            # second scheduled snapshot, t = 21.6506, wave fronts visible
            pick = snaps[1] if len(snaps) > 1 else snaps[0]
            return FULL_DIR, os.path.join(FULL_DIR, pick)
    out, snap = _desk_mode_i(tmp_path_factory)
    return out, snap


def test_acceptance_11_renders_and_mode_ii_dominance(mode_i_outputs, tmp_path_factory, capsys):
    out_dir, snapshot_csv = mode_i_outputs
    fig_dir = out_dir if os.access(out_dir, os.W_OK) else str(tmp_path_factory.mktemp("figs"))

    snap_png = os.path.join(fig_dir, "fig_snapshot.png")
    maxima_i = render_snapshot(snapshot_csv, snap_png)
    assert os.path.getsize(snap_png) > 1000
    assert maxima_i["divv"] > 0.0  # emitted pressure wave visible

    energy_png = os.path.join(fig_dir, "fig_energy.png")
    render_energy(os.path.join(out_dir, "energy.csv"), energy_png)
    assert os.path.getsize(energy_png) > 1000

    # Shear-ramp run: rotation dominates divergence after rupture.
    out_ii = str(tmp_path_factory.mktemp("mode_II_desk"))
    _run_simulator(
        [
            "run",
            "--preset",
            "mode_II",
            "--desk",
            "--out",
            out_ii,
            "--duration",
            "34.0",
            "--snapshots",
            "33.0",
        ]
    )
    snaps = sorted(f for f in os.listdir(out_ii) if f.endswith(".csv") and f.startswith("snapshot"))
    maxima_ii = render_snapshot(os.path.join(out_ii, snaps[0]), os.path.join(out_ii, "fig_snapshot.png"))
    printed = capsys.readouterr().out
    assert "max |rot v|" in printed
    assert maxima_ii["rotv"] > maxima_ii["divv"], (
        f"shear-ramp snapshot should be rotation dominated, got {maxima_ii}"
    )
    print(
        f"\nACCEPTANCE 11: PASS - snapshot+energy PNGs rendered; shear-ramp rot max "
        f"{maxima_ii['rotv']:.4g} > div max {maxima_ii['divv']:.4g}"
    )

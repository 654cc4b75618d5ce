import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from nhfigures import FigureJob, SchemaError, plot_spec, render
from nhfigures.render import third_derivative_curve


LN2 = float(np.log(2.0))


@pytest.fixture
def engine_sweep_csv(tmp_path):
    # closed-form fixture points: gamma 0, 0.5, 1.0 -> 0, 0.130812..., ln 2
    df = pd.DataFrame({
        "gamma": [0.0, 0.5, 1.0],
        "T": [10.0, 10.0, 10.0],
        "W_total": [0.0, 1.299, 6.892],
        "T_times_INH": [0.0, 1.314, 6.981],
        "closed_form": [0.0, 0.130812035941137, LN2],
    })
    path = tmp_path / "engine_sweep.csv"
    df.to_csv(path, index=False)
    return path


@pytest.fixture
def cycle_trace_csv(tmp_path):
    t = np.linspace(0, 10, 30)
    df = pd.DataFrame({
        "t": t, "U": np.cos(t), "S": 0.6 + 0.05 * t, "Q_rate": 0 * t,
        "W_rate": 0 * t, "Sigma_rate": 0 * t, "J_S": 0 * t,
        "I_NH": np.where(t < 5, 0.1 * t, 0.0),
        "stage": np.where(t < 5, 1, 3),
    })
    path = tmp_path / "cycle_trace.csv"
    df.to_csv(path, index=False)
    return path


@pytest.fixture
def hn_sweep_csv(tmp_path):
    # fine g window at one temperature with a curvature kink at g = 0.5
    g = np.round(np.arange(0.40, 0.601, 0.002), 6)
    inh = np.where(g < 0.5, 0.0, (g - 0.5) ** 2) + 0.2 * g
    df = pd.DataFrame({
        "L": 5000, "J": 1.0, "T": 1.0, "g": g,
        "mu": -2.0, "mu0": -2.1, "phi0": np.clip((g - 0.5) * 2, 0, None),
        "I_NH": inh,
    })
    path = tmp_path / "hn_sweep.csv"
    df.to_csv(path, index=False)
    return path


@pytest.fixture
def hn_phase_csv(tmp_path):
    rows = []
    for T in (0.5, 1.0, 1.5):
        for g in (0.2, 0.6, 1.0):
            rows.append((1000, 1.0, T, g, -2.0, -2.1, g * T / 2, g + T))
    df = pd.DataFrame(rows, columns=["L", "J", "T", "g", "mu", "mu0", "phi0", "I_NH"])
    path = tmp_path / "hn_phase.csv"
    df.to_csv(path, index=False)
    return path


def test_all_five_jobs_render(tmp_path, engine_sweep_csv, cycle_trace_csv,
                              hn_sweep_csv, hn_phase_csv):
    inputs = {
        "fig1b": engine_sweep_csv,
        "fig1c": cycle_trace_csv,
        "fig2b": hn_phase_csv,
        "fig2c": hn_sweep_csv,
        "fig2d": hn_sweep_csv,
    }
    for fig_id, csv in inputs.items():
        out = tmp_path / f"{fig_id}.png"
        path = render(FigureJob(fig_id, str(csv), str(out)))
        assert Path(path).exists() and Path(path).stat().st_size > 0


def test_schema_mismatch_names_missing_column(tmp_path, engine_sweep_csv):
    df = pd.read_csv(engine_sweep_csv).drop(columns=["closed_form"])
    bad = tmp_path / "bad.csv"
    df.to_csv(bad, index=False)
    with pytest.raises(SchemaError, match="closed_form"):
        render(FigureJob("fig1b", str(bad), str(tmp_path / "x.png")))


def test_single_row_engine_sweep_renders(tmp_path):
    df = pd.DataFrame({
        "gamma": [0.5], "T": [10.0], "W_total": [1.3],
        "T_times_INH": [1.31], "closed_form": [0.1308],
    })
    csv = tmp_path / "one.csv"
    df.to_csv(csv, index=False)
    out = tmp_path / "one.png"
    assert render(FigureJob("fig1b", str(csv), str(out))) == str(out)
    assert out.exists()


def test_fixture_overlay_coincides_at_closed_form_points(engine_sweep_csv):
    # at the fixture gammas the information-content curve and the closed form
    # agree to the cycle tolerance, so the overlay curves coincide
    spec = plot_spec(FigureJob("fig1b", str(engine_sweep_csv), "unused.png"))
    series = {name: (x, y) for name, x, y in spec["series"]}
    t_inh = np.array(series["T x information content"][1])
    closed = np.array(series["T x high-T closed form"][1])
    assert np.allclose(t_inh, closed, rtol=0.05, atol=1e-12)


def test_fig2c_peak_matches_library_stencil(hn_sweep_csv):
    df = pd.read_csv(hn_sweep_csv)
    g, d3 = third_derivative_curve(df["g"].to_numpy(), df["I_NH"].to_numpy())
    peak = g[np.argmax(np.abs(d3))]
    spec = plot_spec(FigureJob("fig2c", str(hn_sweep_csv), "unused.png"))
    name, gx, d3x = spec["series"][0]
    assert np.allclose(gx, g) and np.allclose(d3x, d3)
    assert abs(peak - 0.5) <= 0.004 + 1e-12


def test_plot_spec_deterministic(hn_sweep_csv):
    job = FigureJob("fig2c", str(hn_sweep_csv), "unused.png")
    assert json.dumps(plot_spec(job)) == json.dumps(plot_spec(job))


def test_cli_exit_codes(tmp_path, engine_sweep_csv):
    out = tmp_path / "f.png"
    cmd = [sys.executable, "-m", "nhfigures.cli"]
    ok = subprocess.run(cmd + ["fig1b", "--in", str(engine_sweep_csv), "--out", str(out)])
    assert ok.returncode == 0 and out.exists()
    bad = subprocess.run(
        cmd + ["fig1c", "--in", str(engine_sweep_csv), "--out", str(tmp_path / "g.png")],
        capture_output=True, text=True,
    )
    assert bad.returncode == 2
    assert "missing column" in bad.stderr
    missing = subprocess.run(
        cmd + ["fig1b", "--in", str(tmp_path / "nope.csv"), "--out", str(out)],
        capture_output=True,
    )
    assert missing.returncode == 2

"""Render the standard figure set from nhthermo's public CSV schemas.

Each figure id declares the input columns it needs; a file missing any of
them fails validation before anything is drawn. Rendering is read-only and
the plot specification (series order, axes, data) is a pure function of the
input rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


class SchemaError(ValueError):
    """Input CSV does not carry the columns the figure needs."""


ENGINE_SWEEP = ("gamma", "T", "W_total", "T_times_INH", "closed_form")
CYCLE_TRACE = ("t", "U", "S", "Q_rate", "W_rate", "Sigma_rate", "J_S", "I_NH", "stage")
HN_SWEEP = ("L", "J", "T", "g", "mu", "mu0", "phi0", "I_NH")

SCHEMAS = {
    "fig1b": ENGINE_SWEEP,
    "fig1c": CYCLE_TRACE,
    "fig2b": HN_SWEEP,
    "fig2c": HN_SWEEP,
    "fig2d": HN_SWEEP,
}


@dataclass(frozen=True)
class FigureJob:
    figure_id: str
    input_csv: str
    output_image: str
    style: str = "default"

    def __post_init__(self):
        if self.figure_id not in SCHEMAS:
            raise SchemaError(f"unknown figure id: {self.figure_id}")


def load_validated(job: FigureJob) -> pd.DataFrame:
    df = pd.read_csv(job.input_csv)
    missing = [c for c in SCHEMAS[job.figure_id] if c not in df.columns]
    if missing:
        raise SchemaError(
            f"{job.input_csv} is missing column(s) {', '.join(missing)} "
            f"required by {job.figure_id}"
        )
    if len(df) == 0:
        raise SchemaError(f"{job.input_csv} has no data rows")
    return df


def third_derivative_curve(g: np.ndarray, values: np.ndarray):
    """Five-point central third derivative on a uniform grid; this is the
    same stencil the library's transition locator uses, so the peak abscissa
    of the rendered curve coincides with the reported feature location."""
    g = np.asarray(g, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(g) < 5:
        return g[:0], v[:0]
    h = float(np.mean(np.diff(g)))
    d3 = (v[4:] - 2 * v[3:-1] + 2 * v[1:-3] - v[:-4]) / (2 * h**3)
    return g[2:-2], d3


def _plot_fig1b(df: pd.DataFrame, ax):
    df = df.sort_values("gamma")
    T = df["T"].iloc[0]
    ax.plot(df["gamma"], df["W_total"], "o-", label="work extracted")
    ax.plot(df["gamma"], df["T_times_INH"], "s--", label="T x information content")
    ax.plot(df["gamma"], T * df["closed_form"], "k:", label="T x high-T closed form")
    ax.set_xlabel("gamma")
    ax.set_ylabel("work")
    ax.set_title(f"cycle work vs nonreciprocity (T = {T:g})")
    ax.legend()


def _plot_fig1c(df: pd.DataFrame, ax):
    for column, style in (("U", "-"), ("S", "--"), ("I_NH", "-.")):
        ax.plot(df["t"], df[column], style, label=column)
    stages = df["stage"].to_numpy()
    bounds = df["t"].to_numpy()[np.nonzero(np.diff(stages))[0]]
    for b in bounds:
        ax.axvline(b, color="0.6", lw=0.8)
    ax.set_xlabel("t")
    ax.set_title("cycle thermodynamics by stage")
    ax.legend()


def _plot_fig2b(df: pd.DataFrame, ax):
    pivot = df.pivot_table(index="T", columns="g", values="phi0")
    mesh = ax.pcolormesh(pivot.columns, pivot.index, pivot.to_numpy(), shading="nearest")
    plt.colorbar(mesh, ax=ax, label="condensate fraction")
    ax.set_xlabel("g")
    ax.set_ylabel("T")
    ax.set_title("order parameter")


def _plot_fig2_derivative(df: pd.DataFrame, ax, figure_id):
    for T, block in df.groupby("T"):
        block = block.sort_values("g")
        g, d3 = third_derivative_curve(block["g"].to_numpy(), block["I_NH"].to_numpy())
        if len(g) == 0:
            ax.plot(block["g"], block["I_NH"], "o", label=f"T = {T:g} (too few points)")
            continue
        ax.plot(g, d3, "-", label=f"T = {T:g}")
    ax.set_xlabel("g")
    ax.set_ylabel("d3 I_NH / dg3")
    ax.set_title("third derivative of the information content")
    ax.legend()


def render(job: FigureJob) -> str:
    """Render one figure job; returns the output path."""
    df = load_validated(job)
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=130)
    try:
        if job.figure_id == "fig1b":
            _plot_fig1b(df, ax)
        elif job.figure_id == "fig1c":
            _plot_fig1c(df, ax)
        elif job.figure_id == "fig2b":
            _plot_fig2b(df, ax)
        else:
            _plot_fig2_derivative(df, ax, job.figure_id)
        fig.tight_layout()
        fig.savefig(job.output_image)
    finally:
        plt.close(fig)
    return job.output_image


def plot_spec(job: FigureJob) -> dict:
    """Deterministic description of what render() would draw: series labels
    and data in order. Used to assert reproducibility without raster diffs."""
    df = load_validated(job)
    spec = {"figure_id": job.figure_id, "series": []}
    if job.figure_id == "fig1b":
        df = df.sort_values("gamma")
        T = df["T"].iloc[0]
        spec["series"] = [
            ("work extracted", df["gamma"].tolist(), df["W_total"].tolist()),
            ("T x information content", df["gamma"].tolist(), df["T_times_INH"].tolist()),
            ("T x high-T closed form", df["gamma"].tolist(), (T * df["closed_form"]).tolist()),
        ]
    elif job.figure_id == "fig1c":
        for column in ("U", "S", "I_NH"):
            spec["series"].append((column, df["t"].tolist(), df[column].tolist()))
    elif job.figure_id == "fig2b":
        pivot = df.pivot_table(index="T", columns="g", values="phi0")
        spec["series"] = [("phi0", pivot.columns.tolist(), pivot.to_numpy().tolist())]
    else:
        for T, block in df.groupby("T"):
            block = block.sort_values("g")
            g, d3 = third_derivative_curve(block["g"].to_numpy(), block["I_NH"].to_numpy())
            spec["series"].append((f"T = {T:g}", g.tolist(), d3.tolist()))
    return spec

"""Render figure images from experiment CSV files.

Three CSV schemas are consumed, matching the experiment runner's contract:

  sweep       experiment,K,variant,mean_utility_bpj,mean_tx_power_w,
              mean_sinr_db,frac_at_pmax,trials
  profile     rank,quantile_gain,power_w,sinr_db,utility_bpj,method
  efficiency  gamma,packet_success,efficiency

Values are plotted exactly as stored; any dB conversion belongs to the
producer.  One line is drawn per variant (sweep figures) or per method
(profile figures).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

FIGURES = ("efficiency", "utility_vs_k", "power_vs_k", "sinr_vs_k",
           "frac_pmax_vs_k", "power_profile", "utility_profile")

_SWEEP_AXES = {
    "utility_vs_k": ("mean_utility_bpj", "average utility [bit/Joule]", "log"),
    "power_vs_k": ("mean_tx_power_w", "average transmit power [W]", "log"),
    "sinr_vs_k": ("mean_sinr_db", "average output SINR [dB]", "linear"),
    "frac_pmax_vs_k": ("frac_at_pmax", "fraction of users at the cap",
                       "linear"),
}

_PROFILE_AXES = {
    "power_profile": ("power_w", "transmit power [W]", "log"),
    "utility_profile": ("utility_bpj", "utility [bit/Joule]", "log"),
}


class SchemaError(ValueError):
    """The CSV does not carry the columns the figure needs."""


@dataclass(frozen=True)
class PlotSpec:
    input_csv: str
    figure: str
    output_image: str

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise ValueError(f"unknown figure tag {self.figure!r}; "
                             f"expected one of {', '.join(FIGURES)}")


def _read_rows(path: str, needed: tuple[str, ...]) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in needed:
            if column not in header:
                raise SchemaError(f"missing column {column!r} in {path}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"no data rows in {path}")
    return rows


def build_figure(input_csv: str, figure: str):
    """Build the matplotlib figure; returns (figure, number of series)."""
    if figure == "efficiency":
        rows = _read_rows(input_csv, ("gamma", "packet_success", "efficiency"))
        gamma = [float(r["gamma"]) for r in rows]
        fig, ax = plt.subplots(figsize=(7, 5))
        ax.plot(gamma, [float(r["packet_success"]) for r in rows],
                label="error-free packet probability")
        ax.plot(gamma, [float(r["efficiency"]) for r in rows], "--",
                label="efficiency function")
        ax.set_xlabel("receive SINR (linear)")
        ax.set_ylabel("probability")
        n_series = 2
    elif figure in _SWEEP_AXES:
        column, ylabel, yscale = _SWEEP_AXES[figure]
        rows = _read_rows(input_csv, ("K", "variant", column))
        fig, ax = plt.subplots(figsize=(7, 5))
        variants = []
        for row in rows:
            if row["variant"] not in variants:
                variants.append(row["variant"])
        for variant in variants:
            pts = [(int(r["K"]), float(r[column])) for r in rows
                   if r["variant"] == variant]
            pts.sort()
            ax.plot([k for k, _ in pts], [v for _, v in pts], marker="o",
                    label=variant)
        ax.set_xlabel("number of users K")
        ax.set_ylabel(ylabel)
        ax.set_yscale(yscale)
        n_series = len(variants)
    else:
        column, ylabel, yscale = _PROFILE_AXES[figure]
        rows = _read_rows(input_csv, ("rank", "method", column))
        fig, ax = plt.subplots(figsize=(7, 5))
        methods = []
        for row in rows:
            if row["method"] not in methods:
                methods.append(row["method"])
        for method in methods:
            pts = [(int(r["rank"]), float(r[column])) for r in rows
                   if r["method"] == method]
            pts.sort()
            ax.plot([k for k, _ in pts], [v for _, v in pts], label=method)
        ax.set_xlabel("user rank (strongest first)")
        ax.set_ylabel(ylabel)
        ax.set_yscale(yscale)
        n_series = len(methods)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig, n_series


def render(spec: PlotSpec) -> str:
    """Render one figure to disk and return the written path."""
    fig, _ = build_figure(spec.input_csv, spec.figure)
    out = Path(spec.output_image)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return str(out)

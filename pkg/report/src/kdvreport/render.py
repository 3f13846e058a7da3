"""Render figures and a markdown summary from simulation output files.

Consumes the fixed CSV/JSON schemas emitted by the simulation CLI and never
recomputes any physics: the decay envelope comes from fit.json when present,
the mechanism table is comparison.csv verbatim.
"""

from __future__ import annotations

import datetime
import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

TRACE_HEADER = ["t", "E", "diss_damping", "diss_boundary", "mass", "ux0", "linf"]
COMPARISON_HEADER = ["mechanism", "k", "energy_ratio", "r2"]
CARLEMAN_HEADER = ["s", "ratio"]


class SchemaError(Exception):
    """An input file does not carry the expected fixed schema."""


@dataclass
class ReportBundle:
    """Input files for one report; missing optional members are skipped."""

    directory: str
    out_dir: str | None = None
    trace_csv: str = field(init=False)
    comparison_csv: str = field(init=False)
    carleman_csv: str = field(init=False)
    summary_json: str = field(init=False)
    fit_json: str = field(init=False)

    def __post_init__(self):
        self.trace_csv = os.path.join(self.directory, "trace.csv")
        self.comparison_csv = os.path.join(self.directory, "comparison.csv")
        self.carleman_csv = os.path.join(self.directory, "carleman.csv")
        self.summary_json = os.path.join(self.directory, "summary.json")
        self.fit_json = os.path.join(self.directory, "fit.json")
        if self.out_dir is None:
            self.out_dir = self.directory


def read_csv_columns(path: str, expected: list[str]) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header != expected:
            unexpected = [c for c in header if c not in expected]
            missing = [c for c in expected if c not in header]
            bad = (unexpected + missing or header)[0]
            raise SchemaError(f"{os.path.basename(path)}: unexpected column {bad!r} "
                              f"(header {header})")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    if not rows:
        raise SchemaError(f"{os.path.basename(path)}: no data rows")
    cols: dict[str, np.ndarray] = {}
    for j, name in enumerate(expected):
        values = [r[j] for r in rows]
        if name == "mechanism":
            cols[name] = np.array(values)
        else:
            try:
                cols[name] = np.array([float(v) for v in values])
            except ValueError as exc:
                raise SchemaError(f"{os.path.basename(path)}: column {name!r}: {exc}")
    return cols


def render_decay_figure(bundle: ReportBundle) -> str:
    trace = read_csv_columns(bundle.trace_csv, TRACE_HEADER)
    t = trace["t"]
    norm = np.sqrt(np.maximum(2.0 * trace["E"], 0.0))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.semilogy(t, np.maximum(norm, 1e-300), lw=1.2, label="|u(t)|")
    if os.path.exists(bundle.fit_json):
        with open(bundle.fit_json, "r", encoding="utf-8") as fh:
            fit = json.load(fh)
        envelope = fit["C"] * norm[0] * np.exp(-fit["k"] * t)
        ax.semilogy(t, envelope, "--", lw=1.0,
                    label=f"envelope C e^(-k t), k={fit['k']:.4g}")
    ax.set_xlabel("t")
    ax.set_ylabel("|u(t)|")
    ax.set_title("Energy decay")
    ax.legend(loc="upper right")
    ax.grid(True, which="both", alpha=0.3)
    out = os.path.join(bundle.out_dir, "decay.png")
    fig.savefig(out, dpi=110, metadata={"Software": "kdv-report"})
    plt.close(fig)
    return out


def render_comparison_markdown(bundle: ReportBundle, timestamps: bool) -> str:
    comp = read_csv_columns(bundle.comparison_csv, COMPARISON_HEADER)
    lines = ["# Damping mechanism comparison", ""]
    if timestamps:
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        lines += [f"Generated: {stamp}", ""]
    if os.path.exists(bundle.summary_json):
        with open(bundle.summary_json, "r", encoding="utf-8") as fh:
            summary = json.load(fh)
        snapped = summary.get("snapped_T")
        version = summary.get("version", "unknown")
        lines += [f"Producer: `{version}`, horizon T = {snapped}", ""]
    lines += [
        "| mechanism | fitted k | E(T)/E(0) | r^2 |",
        "|---|---|---|---|",
    ]
    for i in range(comp["mechanism"].size):
        lines.append(
            f"| {comp['mechanism'][i]} | {comp['k'][i]:.6g} "
            f"| {comp['energy_ratio'][i]:.6g} | {comp['r2'][i]:.6g} |"
        )
    lines.append("")
    out = os.path.join(bundle.out_dir, "comparison.md")
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines))
    return out


def render_carleman_figure(bundle: ReportBundle) -> str | None:
    if not os.path.exists(bundle.carleman_csv):
        return None
    data = read_csv_columns(bundle.carleman_csv, CARLEMAN_HEADER)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(data["s"], data["ratio"], "o-", lw=1.2)
    ax.set_xlabel("s")
    ax.set_ylabel("weighted ratio")
    ax.set_title("Weighted-estimate ratio vs s")
    ax.grid(True, which="both", alpha=0.3)
    out = os.path.join(bundle.out_dir, "carleman.png")
    fig.savefig(out, dpi=110, metadata={"Software": "kdv-report"})
    plt.close(fig)
    return out


def render(bundle: ReportBundle, timestamps: bool = True) -> dict:
    """Produce decay.png, comparison.md, and carleman.png when available."""
    os.makedirs(bundle.out_dir, exist_ok=True)
    produced = {}
    if os.path.exists(bundle.trace_csv):
        produced["decay"] = render_decay_figure(bundle)
    if os.path.exists(bundle.comparison_csv):
        produced["comparison"] = render_comparison_markdown(bundle, timestamps)
    carleman = render_carleman_figure(bundle)
    if carleman:
        produced["carleman"] = carleman
    if not produced:
        raise SchemaError(f"no renderable inputs found in {bundle.directory}")
    return produced

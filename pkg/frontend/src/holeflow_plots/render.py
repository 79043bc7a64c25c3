"""Render figures from holeflow report files.

Three figure kinds, one image each:

* ``sweep``     log-log gap curves against eps from ``sweep.csv`` +
                ``sweep.json``, with the fitted slopes annotated verbatim
                (the renderer never refits anything);
* ``energy``    relative-energy samples and their exponential envelope from a
                certificate JSON;
* ``gamma-map`` heatmaps of the three decay exponents over the (m, alpha)
                plane from ``gamma_map.csv``, with the admissible region
                outlined from the report's own positivity column.

Reports are read-only inputs; a schema mismatch aborts with the column diff.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("sweep", "energy", "gamma-map")

SWEEP_COLUMNS = {"epsilon", "status", "velocity_gap", "temperature_gap",
                 "boussinesq_residual"}
GAMMA_COLUMNS = {"m", "alpha", "gamma1", "gamma2", "gamma3", "all_positive"}


class SchemaError(Exception):
    """Report does not look like what this renderer consumes."""

    def __init__(self, kind: str, missing, found):
        self.missing = sorted(missing)
        self.found = sorted(found)
        super().__init__(
            f"{kind} report schema mismatch: missing columns {self.missing}; "
            f"found {self.found}")


@dataclass(frozen=True)
class FigureSpec:
    report: Path            # CSV or JSON report path
    kind: str               # sweep | energy | gamma-map
    output: Path            # image file to write (.png / .svg)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")


def slope_label(value: float) -> str:
    """Fixed rounding rule shared with the tests: report values are annotated
    with four decimals, never recomputed."""
    return f"{value:.4f}"


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise SchemaError("empty", SWEEP_COLUMNS, set())
    return rows


def render_sweep(spec: FigureSpec) -> dict:
    rows = _read_csv(spec.report)
    found = set(rows[0])
    if not SWEEP_COLUMNS <= found:
        raise SchemaError("sweep", SWEEP_COLUMNS - found, found)
    ok = [r for r in rows if r["status"] == "ok"]
    if not ok:
        raise SchemaError("sweep", {"<no ok rows>"}, found)

    slopes = {}
    sidecar = spec.report.with_suffix(".json")
    if sidecar.exists():
        payload = json.loads(sidecar.read_text())
        for key, fit in payload.get("fitted_slopes", {}).items():
            if fit is not None:
                slopes[key] = fit["exponent"]

    eps = [float(r["epsilon"]) for r in ok]
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    annotations = []
    for key, marker in (("velocity_gap", "o"), ("temperature_gap", "s"),
                        ("boussinesq_residual", "^")):
        vals = [float(r[key]) for r in ok]
        label = key.replace("_", " ")
        if key in slopes:
            text = slope_label(slopes[key])
            label += f" (slope {text})"
            annotations.append((key, text))
        ax.loglog(eps, vals, marker=marker, label=label)
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel("gap / residual")
    ax.invert_xaxis()
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(spec.output, dpi=150)
    plt.close(fig)
    return {"kind": "sweep", "points": len(ok), "annotations": dict(annotations)}


def render_energy(spec: FigureSpec) -> dict:
    payload = json.loads(Path(spec.report).read_text())
    samples = payload.get("samples")
    if not samples or not {"t", "E", "bound"} <= set(samples[0]):
        raise SchemaError("energy", {"samples[t,E,bound]"},
                          set(samples[0]) if samples else set())
    t = [s["t"] for s in samples]
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    ax.plot(t, [s["E"] for s in samples], "o-", label="relative energy")
    ax.plot(t, [s["bound"] for s in samples], "--", label="envelope")
    verdict = "pass" if payload.get("certificate") else "fail"
    ax.set_title(f"certificate: {verdict} (margin {payload.get('margin', 0):.2e})",
                 fontsize=9)
    ax.set_xlabel("t")
    ax.set_ylabel("E")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.output, dpi=150)
    plt.close(fig)
    return {"kind": "energy", "points": len(samples), "certificate": verdict}


def render_gamma_map(spec: FigureSpec) -> dict:
    rows = _read_csv(spec.report)
    found = set(rows[0])
    if not GAMMA_COLUMNS <= found:
        raise SchemaError("gamma-map", GAMMA_COLUMNS - found, found)
    ms = sorted({float(r["m"]) for r in rows})
    alphas = sorted({float(r["alpha"]) for r in rows})
    shape = (len(ms), len(alphas))
    grids = {k: np.full(shape, np.nan) for k in ("gamma1", "gamma2", "gamma3")}
    positive = np.zeros(shape)
    mi = {v: i for i, v in enumerate(ms)}
    ai = {v: i for i, v in enumerate(alphas)}
    for r in rows:
        i, j = mi[float(r["m"])], ai[float(r["alpha"])]
        for k in grids:
            grids[k][i, j] = float(r[k])
        positive[i, j] = float(r["all_positive"])

    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2), sharey=True)
    extent = (alphas[0], alphas[-1], ms[0], ms[-1])
    for ax, key in zip(axes, ("gamma1", "gamma2", "gamma3")):
        im = ax.imshow(grids[key], origin="lower", extent=extent, aspect="auto",
                       cmap="RdBu", vmin=-np.nanmax(np.abs(grids[key])),
                       vmax=np.nanmax(np.abs(grids[key])))
        if positive.max() > positive.min():
            ax.contour(alphas, ms, positive, levels=[0.5], colors="k",
                       linewidths=1.2)
        ax.set_title(key, fontsize=9)
        ax.set_xlabel(r"$\alpha$")
        fig.colorbar(im, ax=ax, shrink=0.85)
    axes[0].set_ylabel("m")
    fig.tight_layout()
    fig.savefig(spec.output, dpi=150)
    plt.close(fig)
    return {"kind": "gamma-map", "cells": int(np.isfinite(grids["gamma1"]).sum())}


_RENDERERS = {"sweep": render_sweep, "energy": render_energy,
              "gamma-map": render_gamma_map}


def render(spec: FigureSpec) -> dict:
    """Write the image described by the figure spec; returns render metadata."""
    report = Path(spec.report)
    if not report.exists():
        raise FileNotFoundError(report)
    Path(spec.output).parent.mkdir(parents=True, exist_ok=True)
    return _RENDERERS[spec.kind](spec)

"""Trajectory construction and on-disk format (manifest + raw dumps).

A trajectory directory holds ``manifest.json`` plus one raw dump per field
per sample.  Velocities are stored per component at cell centers, so
compressible runs (with their staggered faces averaged and zero-filled on
obstacles) and incompressible runs share one format and one loader.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grids import Grid, GridField, load_raw, save_raw
from .nsf import NSFResult
from .ob import OBResult
from .operators import extend
from .relenergy import Trajectory


def ob_trajectory(result: OBResult) -> Trajectory:
    vel = [st.U.to_cell_vector() for st in result.states]
    temp = [st.Theta.copy() for st in result.states]
    pres = [st.Pi.copy() for st in result.states]
    return Trajectory(result.grid, list(result.times), vel, temp, pres, kind="ob")


def nsf_trajectory(result: NSFResult, mach: float, theta_bar: float) -> Trajectory:
    """Extended perturbation trajectory of a compressible run.

    Velocity: face averages, zero on obstacle cells (the zero extension).
    Temperature: (theta - theta_bar)/eps^m with the harmonic extension over
    obstacle cells (Neumann data breaks the zero extension).
    """
    hole = result.hole_mask
    fluid = ~hole
    vel, temp = [], []
    for st in result.states:
        v = st.u.to_cell_vector()
        v *= fluid[..., None]
        vel.append(v)
        theta1 = np.where(fluid, (st.theta - theta_bar) / mach, 0.0)
        temp.append(extend(GridField(result.grid, theta1), hole).data)
    return Trajectory(result.grid, list(result.times), vel, temp, kind="nsf")


def save_trajectory(outdir, traj: Trajectory, extra_manifest: dict | None = None):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = traj.grid
    samples = []
    for k, t in enumerate(traj.times):
        entry = {"t": t, "fields": {}}
        for a in range(grid.d):
            name = f"vel{k:04d}_{'xyz'[a]}.raw"
            save_raw(outdir / name, traj.velocity[k][..., a], grid.spacing, grid.origin)
            entry["fields"][f"velocity_{'xyz'[a]}"] = name
        name = f"temp{k:04d}.raw"
        save_raw(outdir / name, traj.temperature[k], grid.spacing, grid.origin)
        entry["fields"]["temperature"] = name
        if traj.pressure is not None:
            name = f"pres{k:04d}.raw"
            save_raw(outdir / name, traj.pressure[k], grid.spacing, grid.origin)
            entry["fields"]["pressure"] = name
        samples.append(entry)
    manifest = {
        "kind": traj.kind,
        "dims": list(grid.dims),
        "spacing": grid.spacing,
        "origin": list(grid.origin),
        "times": list(traj.times),
        "samples": samples,
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def load_trajectory(indir) -> Trajectory:
    indir = Path(indir)
    with open(indir / "manifest.json") as fh:
        manifest = json.load(fh)
    grid = Grid(tuple(manifest["dims"]), manifest["spacing"], tuple(manifest["origin"]))
    vel, temp, pres = [], [], []
    has_pressure = "pressure" in manifest["samples"][0]["fields"] if manifest["samples"] else False
    for entry in manifest["samples"]:
        comps = []
        for a in range(grid.d):
            arr, _, _ = load_raw(indir / entry["fields"][f"velocity_{'xyz'[a]}"])
            comps.append(arr)
        vel.append(np.stack(comps, axis=-1))
        arr, _, _ = load_raw(indir / entry["fields"]["temperature"])
        temp.append(arr)
        if has_pressure:
            arr, _, _ = load_raw(indir / entry["fields"]["pressure"])
            pres.append(arr)
    return Trajectory(grid, list(manifest["times"]), vel, temp,
                      pres if has_pressure else None, kind=manifest.get("kind", "ob"))

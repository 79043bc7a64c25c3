import csv
import json
from pathlib import Path

import pytest

from holeflow_plots import FigureSpec, SchemaError, render, slope_label
from holeflow_plots.cli import main

SWEEP_COLS = ["epsilon", "status", "N_holes", "measure_holes",
              "measure_holes_analytic", "measure_res_max",
              "relative_energy_final", "boussinesq_residual", "velocity_gap",
              "temperature_gap", "velocity_gap_w12", "temperature_gap_w12",
              "solenoidal_defect_final"]


def write_sweep_report(path: Path):
    rows = [
        {"epsilon": 0.5, "status": "ok", "N_holes": 16, "measure_holes": 2.53,
         "measure_holes_analytic": 2.54, "measure_res_max": 0.0,
         "relative_energy_final": 0.01, "boussinesq_residual": 0.17,
         "velocity_gap": 0.1098, "temperature_gap": 0.0143,
         "velocity_gap_w12": 2.2, "temperature_gap_w12": 0.10,
         "solenoidal_defect_final": 0.012},
        {"epsilon": 0.4, "status": "ok", "N_holes": 25, "measure_holes": 1.61,
         "measure_holes_analytic": 1.62, "measure_res_max": 0.0,
         "relative_energy_final": 0.0095, "boussinesq_residual": 0.124,
         "velocity_gap": 0.1016, "temperature_gap": 0.0101,
         "velocity_gap_w12": 1.95, "temperature_gap_w12": 0.087,
         "solenoidal_defect_final": 0.010},
        {"epsilon": 0.3, "status": "ok", "N_holes": 64, "measure_holes": 1.33,
         "measure_holes_analytic": 1.32, "measure_res_max": 0.0,
         "relative_energy_final": 0.0091, "boussinesq_residual": 0.121,
         "velocity_gap": 0.0966, "temperature_gap": 0.0080,
         "velocity_gap_w12": 1.79, "temperature_gap_w12": 0.57,
         "solenoidal_defect_final": 0.0095},
    ]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLS)
        w.writeheader()
        w.writerows(rows)
    sidecar = {
        "regime": "relaxed",
        "rows": rows,
        "fitted_slopes": {
            "velocity_gap": {"exponent": 0.2513, "r2": 0.99},
            "temperature_gap": {"exponent": 1.1387, "r2": 0.98},
            "boussinesq_residual": {"exponent": 0.6702, "r2": 0.91},
        },
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar))
    return sidecar


def write_certificate(path: Path):
    payload = {
        "samples": [{"t": 0.1 * k, "E": 1e-8 * k, "c": 2.0,
                     "bound": 1e-3 + 1e-4 * k, "residual": -1e-3}
                    for k in range(6)],
        "certificate": True,
        "margin": 9.9e-4,
        "slack": 1e-3,
    }
    path.write_text(json.dumps(payload))
    return payload


def write_gamma_map(path: Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "alpha", "gamma1", "gamma2", "gamma3", "all_positive"])
        for m in (3.5, 4.0, 4.5):
            for a in (3.0, 3.5, 4.0):
                g1 = min(m - 0.9 * a, 1.5 * (a - 3) / (5 * a - 9))
                g2 = min(1.5 * (a - 1), m)
                g3 = min(m - a, (a - 3) / 2)
                w.writerow([m, a, g1, g2, g3, int(g1 > 0 and g2 > 0 and g3 > 0)])


class TestSweepFigure:
    def test_renders_with_exact_annotations(self, tmp_path):
        sidecar = write_sweep_report(tmp_path / "sweep.csv")
        spec = FigureSpec(tmp_path / "sweep.csv", "sweep", tmp_path / "sweep.png")
        meta = render(spec)
        assert (tmp_path / "sweep.png").stat().st_size > 0
        assert meta["points"] == 3
        for key, fit in sidecar["fitted_slopes"].items():
            assert meta["annotations"][key] == slope_label(fit["exponent"])

    def test_schema_break_raises_with_diff(self, tmp_path):
        path = tmp_path / "broken.csv"
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["epsilon", "status"])
            w.writeheader()
            w.writerow({"epsilon": 0.5, "status": "ok"})
        with pytest.raises(SchemaError) as err:
            render(FigureSpec(path, "sweep", tmp_path / "x.png"))
        assert "velocity_gap" in err.value.missing

    def test_inputs_untouched(self, tmp_path):
        write_sweep_report(tmp_path / "sweep.csv")
        before = (tmp_path / "sweep.csv").read_bytes()
        render(FigureSpec(tmp_path / "sweep.csv", "sweep", tmp_path / "s.png"))
        assert (tmp_path / "sweep.csv").read_bytes() == before


class TestEnergyFigure:
    def test_renders(self, tmp_path):
        write_certificate(tmp_path / "certificate.json")
        meta = render(FigureSpec(tmp_path / "certificate.json", "energy",
                                 tmp_path / "energy.svg"))
        assert (tmp_path / "energy.svg").stat().st_size > 0
        assert meta["certificate"] == "pass"

    def test_empty_report_rejected(self, tmp_path):
        (tmp_path / "cert.json").write_text(json.dumps({"samples": []}))
        with pytest.raises(SchemaError):
            render(FigureSpec(tmp_path / "cert.json", "energy", tmp_path / "e.png"))


class TestGammaMapFigure:
    def test_renders(self, tmp_path):
        write_gamma_map(tmp_path / "gamma_map.csv")
        meta = render(FigureSpec(tmp_path / "gamma_map.csv", "gamma-map",
                                 tmp_path / "map.png"))
        assert (tmp_path / "map.png").stat().st_size > 0
        assert meta["cells"] == 9

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "gamma_map.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "alpha", "gamma1"])
            w.writerow([4.0, 3.5, 0.08])
        with pytest.raises(SchemaError) as err:
            render(FigureSpec(path, "gamma-map", tmp_path / "m.png"))
        assert "gamma2" in err.value.missing


class TestCLI:
    def test_all_three_kinds(self, tmp_path, capsys):
        write_sweep_report(tmp_path / "sweep.csv")
        write_certificate(tmp_path / "certificate.json")
        write_gamma_map(tmp_path / "gamma_map.csv")
        for kind, report, out in (
                ("sweep", "sweep.csv", "a.png"),
                ("energy", "certificate.json", "b.png"),
                ("gamma-map", "gamma_map.csv", "c.png")):
            rc = main(["render", "--kind", kind,
                       "--report", str(tmp_path / report),
                       "--out", str(tmp_path / out)])
            assert rc == 0
            assert (tmp_path / out).exists()

    def test_nonzero_on_schema_break(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("epsilon,status\n0.5,ok\n")
        rc = main(["render", "--kind", "sweep", "--report", str(path),
                   "--out", str(tmp_path / "x.png")])
        assert rc != 0

    def test_nonzero_on_missing_report(self, tmp_path):
        rc = main(["render", "--kind", "sweep",
                   "--report", str(tmp_path / "nope.csv"),
                   "--out", str(tmp_path / "x.png")])
        assert rc != 0

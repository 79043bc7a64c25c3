"""holeflow-plots: turn report files into figures, nothing else."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FIGURE_KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holeflow-plots",
                                description="render holeflow reports to images")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("render", help="render one figure from a report")
    r.add_argument("--kind", choices=FIGURE_KINDS, required=True)
    r.add_argument("--report", required=True, help="CSV/JSON report path")
    r.add_argument("--out", required=True, help="image path (.png or .svg)")
    return p


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    spec = FigureSpec(Path(ns.report), ns.kind, Path(ns.out))
    try:
        meta = render(spec)
    except FileNotFoundError as exc:
        print(f"report not found: {exc}", file=sys.stderr)
        return 2
    except SchemaError as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return 2
    detail = " ".join(f"{k}={v}" for k, v in meta.items())
    print(f"wrote {ns.out} ({detail})")
    return 0


if __name__ == "__main__":
    sys.exit(main())

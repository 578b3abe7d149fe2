"""Command line driver.

    liouville-ext <subcommand> [config] [--out DIR] [--seed N]

Each run writes ``<out>/<subcommand>.csv`` (rows sorted, every row carrying
the config hash and tolerance) and ``<out>/<subcommand>.json`` with keys
experiment, config_hash, pass and metrics.  Extra tables go to
``<out>/<subcommand>.<table>.csv``.  build-surface and build-mesh also write
the surface or mesh file.  Exit status is 0 when every check passes, 2 on a
tolerance failure and 3 on bad input or any other error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .experiments import EXPERIMENTS, Report

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 2, 3

log = logging.getLogger("liouville_ext")


def _sort_key(row: dict):
    return tuple((0, v, "") if isinstance(v, (int, float)) and not isinstance(v, bool) else (1, 0, str(v))
                 for v in row.values())


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_rows(path: Path, rows: list, cfg: ExperimentConfig) -> None:
    rows = sorted(rows, key=_sort_key)
    keys = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys + ["config_hash", "tolerance"])
        for r in rows:
            w.writerow([_cell(r[k]) for k in keys] + [cfg.config_hash, repr(cfg.tolerance)])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if hasattr(x, "item"):
        return x.item()
    return x


def write_report(report: Report, cfg: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / f"{report.experiment}.csv", report.rows, cfg)
    for name, rows in report.tables.items():
        write_rows(out / f"{report.experiment}.{name}.csv", rows, cfg)
    summary = {"experiment": report.experiment, "config_hash": cfg.config_hash, "pass": report.passed,
               "metrics": _jsonable(report.metrics), "config": cfg.as_dict()}
    (out / f"{report.experiment}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def _artifacts(name: str, cfg: ExperimentConfig, out: Path) -> None:
    from .mesh import build_mesh, dump_mesh
    from .surface import build_surface, export_surface

    s = build_surface(cfg.genus)
    if name == "build-surface":
        export_surface(s, out / f"surface_g{cfg.genus}.txt")
    elif name == "build-mesh":
        (out / f"mesh_g{cfg.genus}_h{cfg.h}.txt").write_text(dump_mesh(build_mesh(s, cfg.h, seed=cfg.mesh_seed)))


def run(name: str, cfg: ExperimentConfig) -> Report:
    report = EXPERIMENTS[name](cfg)
    out = Path(cfg.out)
    write_report(report, cfg, out)
    _artifacts(name, cfg, out)
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liouville-ext", description="Extremal length experiments on hyperbolic surfaces")
    p.add_argument("command", choices=sorted(EXPERIMENTS))
    p.add_argument("config", nargs="?", help="config file (key = value lines); defaults apply when omitted")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="run with this single seed (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.out:
            cfg = cfg.replace(out=args.out)
        if args.seed is not None:
            cfg = cfg.replace(seeds=(args.seed,))
        report = run(args.command, cfg)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:   # any failure inside an experiment is an infrastructure error
        log.exception("experiment failed")
        print(f"error: {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{report.experiment}: {'pass' if report.passed else 'FAIL'} "
          f"(config {cfg.config_hash}, output in {cfg.out})")
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

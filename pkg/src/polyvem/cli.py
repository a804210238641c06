"""Command-line front end: ``polyvem run <spec.json>`` and ``polyvem bench <name>``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from polyvem.benchmarks import BENCHMARKS, benchmark_spec
from polyvem.materials import MaterialError
from polyvem.mesh import MeshError, PolygonalMesh
from polyvem.quadrature import QuadratureError
from polyvem.runspec import RunSpec, build, load_spec
from polyvem.solver import ConfigError, ConvergenceError, StepRecord, run_analysis
from polyvem.vem import ElementError

log = logging.getLogger("polyvem")

_ERRORS = (ConfigError, MeshError, MaterialError, ConvergenceError, ElementError,
           QuadratureError, OSError, ValueError)


def _fmt(x: float) -> str:
    return "%.17g" % x


def curve_header(probes: list[str], reaction_tags: list[str]) -> list[str]:
    cols = ["step", "time", "load_factor", "iterations"]
    for p in probes:
        cols += [f"{p}_ux", f"{p}_uy"]
    for t in reaction_tags:
        cols += [f"R_{t}_x", f"R_{t}_y"]
    return cols


def write_curve(records: list[StepRecord], path, probes: list[str], reaction_tags: list[str]) -> None:
    """One row per accepted step; floats with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(curve_header(probes, reaction_tags))
        for r in records:
            row = [str(r.step), _fmt(r.time), _fmt(r.load_factor), str(r.iterations)]
            for p in probes:
                row += [_fmt(v) for v in r.probes[p]]
            for t in reaction_tags:
                row += [_fmt(v) for v in r.reactions[t]]
            w.writerow(row)


def export_deformed_mesh(mesh: PolygonalMesh, u, scale: float, path) -> None:
    """Native-json mesh at ``x + scale * u`` plus the vertex displacement array.

    ``u`` holds vertex displacements, shaped ``(n_vertices, 2)`` or flat.
    """
    u = np.asarray(u, dtype=float)
    if u.size != 2 * mesh.n_vertices:
        raise ValueError(f"displacement has {u.size} entries, mesh needs {2 * mesh.n_vertices}")
    u = u.reshape(mesh.n_vertices, 2)
    doc = mesh.to_dict()
    doc["vertices"] = [[float(x), float(y)] for x, y in mesh.vertices + scale * u]
    doc["displacement"] = [[float(a), float(b)] for a, b in u]
    doc["scale"] = float(scale)
    Path(path).write_text(json.dumps(doc))


def execute(spec: RunSpec, out_dir: Path | None = None) -> Path:
    """Run ``spec`` and write ``curve.csv`` and ``deformed.json``; returns the output dir."""
    out = Path(out_dir) if out_dir is not None else spec.output_dir
    out.mkdir(parents=True, exist_ok=True)

    def progress(rec: StepRecord):
        log.info("step %d t=%g iterations=%d", rec.step, rec.time, rec.iterations)

    result = run_analysis(spec.mesh, spec.config, spec.material, on_step=progress)
    probes = [p.name for p in spec.config.probes]
    tags = sorted({bc.tag for bc in spec.config.dirichlet})
    write_curve(result.records, out / "curve.csv", probes, tags)
    export_deformed_mesh(spec.mesh, result.system.vertex_displacements(), spec.scale,
                         out / "deformed.json")
    return out


def cmd_run(path) -> int:
    try:
        spec = load_spec(path)
        out = execute(spec)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out / 'curve.csv'} and {out / 'deformed.json'}")
    return 0


def cmd_bench(name: str, k: int = 2, density: int = 1, out="out", increments: int | None = None) -> int:
    try:
        doc = benchmark_spec(name, k, density, increments)
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        # the materialized spec is runnable on its own with ``polyvem run``
        doc["output"] = {"dir": "."}
        (out / "spec.json").write_text(json.dumps(doc, indent=2))
        spec = build(doc, out)
        execute(spec, out)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out / 'curve.csv'} and {out / 'deformed.json'}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="polyvem", description="Virtual element solver for inelastic 2D solids.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log every step")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an analysis described by a JSON spec")
    p_run.add_argument("spec", type=Path)

    p_bench = sub.add_parser("bench", help="run a built-in benchmark")
    p_bench.add_argument("name", choices=BENCHMARKS)
    p_bench.add_argument("--k", type=int, default=2, choices=(1, 2, 3))
    p_bench.add_argument("--density", type=int, default=1)
    p_bench.add_argument("--out", type=Path, default=Path("out"))
    p_bench.add_argument("--increments", type=int, default=None,
                         help="plate only: number of displacement increments (default 400)")

    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    if args.command == "run":
        return cmd_run(args.spec)
    return cmd_bench(args.name, args.k, args.density, args.out, args.increments)


if __name__ == "__main__":
    sys.exit(main())

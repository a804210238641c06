"""Run specifications: JSON documents describing one analysis.

Structure is checked against ``data/runspec.schema.json``; semantic checks
(boundary tags, probe locations, material parameters) run after the mesh is
built and before any element is assembled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from polyvem.materials import Material, make_material
from polyvem.mesh import (
    PolygonalMesh,
    generate_annulus_quads,
    generate_half_annulus,
    generate_plate_with_hole,
    generate_rectangle_quads,
    load_mesh,
)
from polyvem.solver import (
    AnalysisConfig,
    ConfigError,
    DirichletBC,
    LoadProgram,
    NewtonSettings,
    Probe,
    TractionBC,
)

GENERATORS = {
    "rectangle-quads": generate_rectangle_quads,
    "annulus-quads": generate_annulus_quads,
    "half-annulus": generate_half_annulus,
    "plate-with-hole": generate_plate_with_hole,
}
_COMPONENT = {"x": 0, "y": 1}


def load_schema() -> dict:
    text = resources.files("polyvem").joinpath("data/runspec.schema.json").read_text()
    return json.loads(text)


def validate(doc: dict) -> None:
    """Raise :class:`ConfigError` naming the offending field."""
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid run spec at {where!r}: {exc.message}") from None


@dataclass
class RunSpec:
    doc: dict
    base_dir: Path
    mesh: PolygonalMesh
    material: Material
    config: AnalysisConfig

    @property
    def name(self) -> str:
        return self.doc.get("name", "run")

    @property
    def output_dir(self) -> Path:
        out = Path(self.doc.get("output", {}).get("dir", "out"))
        return out if out.is_absolute() else self.base_dir / out

    @property
    def scale(self) -> float:
        return float(self.doc.get("output", {}).get("scale", 1.0))


def _build_mesh(block: dict, base_dir: Path) -> PolygonalMesh:
    if "file" in block:
        path = Path(block["file"])
        if not path.is_absolute():
            path = base_dir / path
        return load_mesh(path, block.get("format", "native-json"))
    gen = GENERATORS[block["generator"]]
    try:
        return gen(**block["params"])
    except TypeError as exc:
        raise ConfigError(f"bad parameters for mesh generator {block['generator']!r}: {exc}") from None


def build(doc: dict, base_dir: Path | str = ".") -> RunSpec:
    validate(doc)
    base_dir = Path(base_dir)
    mesh = _build_mesh(doc["mesh"], base_dir)

    mat_block = dict(doc["material"])
    if "regime" in doc:
        mat_block.setdefault("regime", doc["regime"])
    try:
        material = make_material(mat_block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid material block: {exc}") from None

    prog = doc["program"]
    program = LoadProgram(
        tuple(float(t) for t in prog["times"]),
        tuple(int(n) for n in prog["increments"]),
        {k: tuple(float(v) for v in vals) for k, vals in prog.get("channels", {}).items()},
    )
    dirichlet = tuple(
        DirichletBC(d["tag"], _COMPONENT[d["component"]], float(d.get("value", 0.0)),
                    d.get("channel", "displacement"))
        for d in doc.get("dirichlet", []))
    tractions = tuple(
        TractionBC(t["tag"], tuple(t["vector"]) if "vector" in t else None,
                   t.get("pressure"), t.get("channel", "load"))
        for t in doc.get("tractions", []))
    probes = tuple(Probe(p["name"], tuple(p["point"])) for p in doc.get("probes", []))

    tags = set(mesh.boundary_tags)
    for bc in (*dirichlet, *tractions):
        if bc.tag not in tags:
            raise ConfigError(f"unknown boundary tag {bc.tag!r}; mesh has {sorted(tags)}")
    lo, hi = mesh.bounding_box()
    pad = 1e-9 * float((hi - lo).max())
    for p in probes:
        if not all(lo[i] - pad <= p.point[i] <= hi[i] + pad for i in range(2)):
            raise ConfigError(f"probe {p.name!r} at {list(p.point)} lies outside the mesh bounding box")
    if len({p.name for p in probes}) != len(probes):
        raise ConfigError("probe names must be unique")

    config = AnalysisConfig(
        k=int(doc["k"]),
        program=program,
        dirichlet=dirichlet,
        tractions=tractions,
        body_force=tuple(doc["body_force"]) if "body_force" in doc else None,
        probes=probes,
        newton=NewtonSettings(**doc.get("newton", {})),
    )
    return RunSpec(doc, base_dir, mesh, material, config)


def load_spec(path) -> RunSpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return build(doc, path.parent)

from pathlib import Path

import numpy as np
import pytest

from polyvem.mesh import load_mesh

DATA = Path(__file__).parent / "data"


def regular_polygon(m, radius=1.0, center=(0.0, 0.0), phase=0.0):
    t = phase + 2.0 * np.pi * np.arange(m) / m
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
REF_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
PENTAGON = np.array([[0.0, 0.0], [2.0, 0.0], [2.5, 1.0], [1.0, 2.2], [-0.3, 1.0]])


@pytest.fixture(scope="session")
def voronoi_mesh():
    return load_mesh(DATA / "voronoi25.json")


# -- analysis oracles shared by the solver and acceptance tests ----------------

PATCH_GRADIENT = np.array([[2e-3, -1e-3], [5e-4, 1.5e-3]])
PATCH_SHIFT = np.array([1e-3, -2e-3])


def linear_field(p):
    return PATCH_SHIFT + np.asarray(p) @ PATCH_GRADIENT.T


def patch_test_error(mesh, k):
    """Max nodal error, relative to max |u|, of the linear-field patch test."""
    from polyvem.materials import LinearElastic
    from polyvem.solver import AnalysisConfig, DirichletBC, LoadProgram, run_analysis

    bcs = tuple(DirichletBC(tag, c, field=lambda p, c=c: linear_field(p)[:, c])
                for tag in mesh.boundary_tags for c in (0, 1))
    cfg = AnalysisConfig(k=k, program=LoadProgram.proportional(1), dirichlet=bcs)
    result = run_analysis(mesh, cfg, LinearElastic(1000.0, 0.3))
    sysm = result.system
    nodes = sysm.node_coords[: sysm.n_nodes]
    u = result.u[: 2 * sysm.n_nodes].reshape(-1, 2)
    exact = linear_field(nodes)
    return float(np.abs(u - exact).max() / np.abs(exact).max())


def lame_radial(r, p=10.0, r_in=2.0, r_out=4.0, E=1000.0, nu=0.3):
    """Plane-strain radial displacement of a pressurized thick cylinder."""
    c = p * r_in ** 2 / (E * (r_out ** 2 - r_in ** 2))
    return c * (1 + nu) * ((1 - 2 * nu) * r + r_out ** 2 / r)


# -- acceptance report -------------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def report(criterion: int, ok: bool, detail: str) -> bool:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])

"""Built-in benchmark run specifications (pure data, see :mod:`polyvem.runspec`).

``density`` scales every mesh division count; density 1 is the reference mesh.
"""

from __future__ import annotations

import math

BENCHMARKS = ("cylinder-ve1", "cylinder-ve2", "plate", "sma-arch")

# Prony weights (mu0, mu1) of the two viscoelastic materials
_CYLINDER_PRONY = {"cylinder-ve1": (0.01, 0.99), "cylinder-ve2": (0.3, 0.7)}


def cylinder(name: str, k: int = 2, density: int = 1) -> dict:
    r_in, r_out = 2.0, 4.0
    mu0, mu1 = _CYLINDER_PRONY[name]
    n = 16 * density
    return {
        "name": name,
        "mesh": {"generator": "annulus-quads",
                 "params": {"r_in": r_in, "r_out": r_out, "quarter": True, "n_r": n, "n_theta": n}},
        "material": {"model": "maxwell", "E": 1000.0, "nu": 0.3, "mu0": mu0, "mu": [mu1], "lam": [1.0]},
        "regime": "plane-strain",
        "k": k,
        # pressure applied at once and held for 20 unit steps
        "program": {"times": [0.0, 20.0], "increments": [20], "channels": {"load": [1.0, 1.0]}},
        "dirichlet": [{"tag": "theta0", "component": "y"}, {"tag": "theta90", "component": "x"}],
        "tractions": [{"tag": "inner", "pressure": 10.0}],
        "probes": [{"name": "A", "point": [r_in, 0.0]}, {"name": "B", "point": [r_out, 0.0]}],
    }


def plate(k: int = 2, density: int = 1, increments: int = 400) -> dict:
    L, H, R = 100.0, 180.0, 50.0
    return {
        "name": "plate",
        "mesh": {"generator": "plate-with-hole",
                 "params": {"L": L, "H": H, "R": R, "refinement": 2 * density}},
        "material": {"model": "mises", "E": 7000.0, "nu": 0.3, "sigma_y0": 24.3,
                     "kappa": math.sqrt(2.0 / 3.0)},
        "regime": "plane-strain",
        "k": k,
        "program": {"times": [0.0, 1.0], "increments": [increments],
                    "channels": {"displacement": [0.0, 1.0]}},
        "dirichlet": [
            {"tag": "symmetry-x", "component": "x"},
            {"tag": "symmetry-y", "component": "y"},
            {"tag": "right", "component": "x"},
            {"tag": "top", "component": "y", "value": 2.0},
        ],
        "probes": [{"name": "A", "point": [R, 0.0]}, {"name": "B", "point": [0.0, R]}],
    }


def sma_arch(k: int = 2, density: int = 1) -> dict:
    r_in, r_out = 3.5, 4.5
    q, t_room = 60.0, 223.0
    return {
        "name": "sma-arch",
        "mesh": {"generator": "half-annulus",
                 "params": {"r_in": r_in, "r_out": r_out, "n_r": 2 * density, "n_theta": 24 * density}},
        "material": {"model": "sma", "E": 53000.0, "nu": 0.36, "eps_L": 0.04, "M_f": 223.0,
                     "h": 1000.0, "beta": 2.1, "sigma_y0": 50.0},
        "regime": "plane-stress",
        "k": k,
        "program": {
            "times": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            "increments": [40, 40, 40, 40, 10],
            "channels": {"load": [0.0, q, 0.0, -q, 0.0, 0.0],
                         "temperature": [t_room] * 5 + [t_room + 80.0]},
        },
        "dirichlet": [{"tag": "clamped", "component": "x"}, {"tag": "clamped", "component": "y"}],
        # unit horizontal traction on the free end, scaled by the load channel
        "tractions": [{"tag": "free", "vector": [1.0, 0.0]}],
        "probes": [{"name": "A", "point": [0.5 * (r_in + r_out), 0.0]}],
        "newton": {"line_search": True},
    }


def benchmark_spec(name: str, k: int = 2, density: int = 1, increments: int | None = None) -> dict:
    if name not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; expected one of {BENCHMARKS}")
    if density < 1:
        raise ValueError("density must be >= 1")
    if increments is not None and name != "plate":
        raise ValueError("an increment override is only available for the plate benchmark")
    if name.startswith("cylinder"):
        return cylinder(name, k, density)
    if name == "plate":
        return plate(k, density, 400 if increments is None else increments)
    return sma_arch(k, density)

"""Shared machinery for vectorized point-wise constitutive updates.

Internally every model works on 3D symmetric tensors restricted to the
components a 2D analysis can excite, stored as Mandel 4-vectors
``[xx, yy, zz, sqrt(2) xy]`` so that the Euclidean dot product equals the
tensor contraction. The 2D interface uses Voigt 3-vectors: strains carry the
engineering shear ``gamma_xy = 2 eps_xy``, stresses carry ``sigma_xy``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

SQRT2 = np.sqrt(2.0)
ONE = np.array([1.0, 1.0, 1.0, 0.0])
P_DEV = np.eye(4) - np.outer(ONE, ONE) / 3.0
ONE_ONE = np.outer(ONE, ONE)
_IN_PLANE = [0, 1, 3]
_V2M = np.array([1.0, 1.0, 1.0 / SQRT2])
REGIMES = ("plane-strain", "plane-stress")


class MaterialError(RuntimeError):
    """Constitutive update failure; ``points`` holds the offending indices."""

    def __init__(self, message, points=()):
        super().__init__(message)
        self.points = np.atleast_1d(np.asarray(points, dtype=int))


def dev(a: np.ndarray) -> np.ndarray:
    return a - (a[..., :3].sum(-1) / 3.0)[..., None] * ONE


def norm(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("...i,...i->...", a, a))


def voigt_to_mandel_strain(eps: np.ndarray, ezz) -> np.ndarray:
    eps = np.atleast_2d(eps)
    out = np.empty((len(eps), 4))
    out[:, 0] = eps[:, 0]
    out[:, 1] = eps[:, 1]
    out[:, 2] = ezz
    out[:, 3] = eps[:, 2] / SQRT2
    return out


def mandel_to_voigt_stress(sig: np.ndarray) -> np.ndarray:
    return sig[:, _IN_PLANE] * _V2M


def mandel_to_voigt_tangent(C: np.ndarray, condense: bool) -> np.ndarray:
    C3 = C[:, _IN_PLANE][:, :, _IN_PLANE]
    if condense:
        cz = C[:, _IN_PLANE, 2]
        zc = C[:, 2, _IN_PLANE]
        C3 = C3 - cz[:, :, None] * zc[:, None, :] / C[:, 2, 2][:, None, None]
    return C3 * _V2M[:, None] * _V2M[None, :]


class MaterialState:
    """Struct-of-arrays bank of per-point internal variables.

    Every model stores ``ezz`` (out-of-plane strain, non-zero only in plane
    stress). ``committed_time`` is set by the solver when a step is accepted.
    """

    def __init__(self, fields: dict[str, np.ndarray], committed_time: float = 0.0):
        self.fields = fields
        self.committed_time = committed_time

    def __getitem__(self, name):
        return self.fields[name]

    def __contains__(self, name):
        return name in self.fields

    def __len__(self):
        return len(self.fields["ezz"])

    def copy(self) -> "MaterialState":
        return MaterialState({k: v.copy() for k, v in self.fields.items()}, self.committed_time)

    def take(self, idx) -> "MaterialState":
        return MaterialState({k: v[idx] for k, v in self.fields.items()}, self.committed_time)

    def put(self, idx, other: "MaterialState") -> None:
        for k, v in other.fields.items():
            self.fields[k][idx] = v

    def with_fields(self, **updates) -> "MaterialState":
        f = dict(self.fields)
        f.update(updates)
        return MaterialState(f, self.committed_time)


@dataclass
class UpdateResult:
    sigma: np.ndarray      # (n, 3) Voigt stress
    sigma_zz: np.ndarray   # (n,)
    tangent: np.ndarray    # (n, 3, 3) consistent tangent, condensed in plane stress
    state: MaterialState   # trial state, not committed


def isotropic_moduli(E: float, nu: float) -> tuple[float, float]:
    """Bulk and shear modulus."""
    return E / (3.0 * (1.0 - 2.0 * nu)), E / (2.0 * (1.0 + nu))


class Material:
    """Base class: subclasses implement :meth:`_update3d` on Mandel vectors."""

    #: field name -> trailing shape of the per-point internal variables
    state_shapes: ClassVar[dict[str, tuple]] = {}
    name: ClassVar[str] = "material"

    E: float
    nu: float
    regime: str

    plane_stress_tol = 1e-13   # relative to E
    plane_stress_max_iter = 25

    def _validate_elastic(self):
        if not self.E > 0:
            raise ValueError(f"E must be positive, got {self.E}")
        if not -1.0 < self.nu < 0.5:
            raise ValueError(f"nu must lie in (-1, 0.5), got {self.nu}")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")

    @property
    def bulk(self) -> float:
        return isotropic_moduli(self.E, self.nu)[0]

    @property
    def shear(self) -> float:
        return isotropic_moduli(self.E, self.nu)[1]

    def initial_state(self, n: int) -> MaterialState:
        fields = {"ezz": np.zeros(n)}
        for key, shape in self.state_shapes.items():
            fields[key] = np.zeros((n, *shape))
        return MaterialState(fields)

    def elastic_tangent(self) -> np.ndarray:
        """Instantaneous elastic 3x3 tangent of the 2D regime."""
        K, G = self.bulk, self.shear
        C = (K * ONE_ONE + 2.0 * G * P_DEV)[None]
        return mandel_to_voigt_tangent(C, self.regime == "plane-stress")[0]

    def _update3d(self, state: MaterialState, eps_n: np.ndarray, eps: np.ndarray,
                  dt: float, temperature) -> tuple[np.ndarray, np.ndarray, dict]:
        raise NotImplementedError

    def update(self, state: MaterialState, eps_n, eps_next, dt: float = 1.0,
               temperature=0.0) -> UpdateResult:
        """Backward-Euler update from the committed ``state`` at ``eps_n``.

        ``eps_n`` and ``eps_next`` are (n, 3) Voigt strains. Returns stresses,
        the consistent tangent and a new (uncommitted) state.
        """
        if not dt > 0:
            raise ValueError(f"time increment must be positive, got {dt}")
        eps_n = np.atleast_2d(np.asarray(eps_n, dtype=float))
        eps_next = np.atleast_2d(np.asarray(eps_next, dtype=float))
        temperature = np.broadcast_to(np.asarray(temperature, dtype=float), (len(eps_next),))
        m_n = voigt_to_mandel_strain(eps_n, state["ezz"])
        if self.regime == "plane-strain":
            m = voigt_to_mandel_strain(eps_next, 0.0)
            sig, C, new = self._update3d(state, m_n, m, dt, temperature)
            new["ezz"] = np.zeros(len(m))
        else:
            sig, C, new = self._plane_stress(state, m_n, eps_next, dt, temperature)
        return UpdateResult(
            mandel_to_voigt_stress(sig),
            sig[:, 2].copy(),
            mandel_to_voigt_tangent(C, self.regime == "plane-stress"),
            MaterialState(new, state.committed_time),
        )

    def _plane_stress(self, state, m_n, eps_next, dt, temperature):
        # nested Newton on eps_zz so that sigma_zz vanishes at every point
        ezz = state["ezz"].copy()
        sig, C, new = self._update3d(state, m_n, voigt_to_mandel_strain(eps_next, ezz), dt, temperature)
        tol = self.plane_stress_tol * self.E
        active = np.flatnonzero(np.abs(sig[:, 2]) > tol)
        for _ in range(self.plane_stress_max_iter):
            if active.size == 0:
                break
            ezz[active] -= sig[active, 2] / C[active, 2, 2]
            s_a, C_a, new_a = self._update3d(
                state.take(active), m_n[active],
                voigt_to_mandel_strain(eps_next[active], ezz[active]), dt, temperature[active])
            sig[active], C[active] = s_a, C_a
            for key, val in new_a.items():
                new[key][active] = val
            active = active[np.abs(s_a[:, 2]) > tol]
        else:
            if active.size:
                raise MaterialError("plane-stress iteration did not converge", active)
        new["ezz"] = ezz
        return sig, C, new


def consistent_tangent_check(material: Material, state: MaterialState, eps_n, eps,
                             dt: float = 1.0, temperature=0.0) -> float:
    """Max relative deviation of the returned tangent from central differences.

    Step size ``1e-6 * |eps|`` with a floor of ``1e-8``. Returns the worst
    point's ``max|K_fd - K| / max|K|``.
    """
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    res = material.update(state, eps_n, eps, dt, temperature)
    n = len(eps)
    K_fd = np.empty((n, 3, 3))
    step = np.maximum(1e-6 * np.linalg.norm(eps, axis=1), 1e-8)
    for j in range(3):
        d = np.zeros_like(eps)
        d[:, j] = step
        sp = material.update(state, eps_n, eps + d, dt, temperature).sigma
        sm = material.update(state, eps_n, eps - d, dt, temperature).sigma
        K_fd[:, :, j] = (sp - sm) / (2.0 * step[:, None])
    scale = np.abs(res.tangent).max(axis=(1, 2))
    return float((np.abs(K_fd - res.tangent).max(axis=(1, 2)) / scale).max())

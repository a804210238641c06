"""Generalized Maxwell solid: elastic volumetric part, Prony-series shear relaxation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from polyvem.materials.base import ONE, ONE_ONE, P_DEV, Material, dev


@dataclass
class MaxwellViscoelastic(Material):
    """Deviatoric relaxation ``G(t) = G (mu0 + sum mu_m exp(-t / lam_m))``.

    Each branch carries a partial deviatoric strain ``h_m`` integrated with
    the exponential recursion (exact for a strain rate that is constant over
    the step).
    """

    E: float
    nu: float
    mu0: float
    mu: tuple[float, ...]
    lam: tuple[float, ...]
    regime: str = "plane-strain"

    name = "maxwell"

    def __post_init__(self):
        self._validate_elastic()
        self.mu = tuple(float(m) for m in self.mu)
        self.lam = tuple(float(t) for t in self.lam)
        if len(self.mu) != len(self.lam):
            raise ValueError("mu and lam must have the same length")
        if any(t <= 0 for t in self.lam):
            raise ValueError("relaxation times must be positive")
        if self.mu0 < 0 or any(m < 0 for m in self.mu):
            raise ValueError("Prony weights must be non-negative")
        if abs(self.mu0 + sum(self.mu) - 1.0) > 1e-12:
            raise ValueError(f"Prony weights must sum to 1, got {self.mu0 + sum(self.mu)}")

    @property
    def state_shapes(self):
        return {"h": (len(self.mu), 4)}

    def relaxation_modulus(self, t):
        t = np.asarray(t, dtype=float)
        return self.shear * (self.mu0 + sum(m * np.exp(-t / l) for m, l in zip(self.mu, self.lam)))

    def step_factors(self, dt: float):
        a = np.exp(-dt / np.array(self.lam))
        b = np.array(self.lam) / dt * -np.expm1(-dt / np.array(self.lam))
        return a, b

    def algorithmic_shear(self, dt: float) -> float:
        """Effective shear modulus relating a strain increment to the stress increment over ``dt``."""
        _, b = self.step_factors(dt)
        return self.shear * (self.mu0 + float(np.dot(self.mu, b)))

    def _update3d(self, state, eps_n, eps, dt, temperature):
        K, G = self.bulk, self.shear
        a, b = self.step_factors(dt)
        e = dev(eps)
        de = e - dev(eps_n)
        h = a[None, :, None] * state["h"] + b[None, :, None] * de[:, None, :]
        s = 2.0 * G * (self.mu0 * e + np.einsum("m,nmi->ni", np.array(self.mu), h))
        sig = K * eps[:, :3].sum(1)[:, None] * ONE + s
        C0 = K * ONE_ONE + 2.0 * G * (self.mu0 + float(np.dot(self.mu, b))) * P_DEV
        return sig, np.broadcast_to(C0, (len(eps), 4, 4)).copy(), {"h": h}


def relaxation_modulus(params: MaxwellViscoelastic, t):
    return params.relaxation_modulus(t)

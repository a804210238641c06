"""Von Mises plasticity with linear isotropic and kinematic hardening (radial return)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from polyvem.materials.base import ONE, ONE_ONE, P_DEV, Material, dev, norm

HALF_SQRT2 = np.sqrt(2.0) / 2.0
UNIAXIAL = np.sqrt(2.0 / 3.0)


@dataclass
class MisesPlasticity(Material):
    """Yield function ``f = |s - alpha| - kappa (sigma_y0 + H_iso * epbar)``.

    Back stress ``alpha = H_kin * e_p``; accumulated strain grows as
    ``kappa * dzeta``. The default ``kappa = sqrt(2)/2`` makes ``sigma_y0`` twice
    the shear yield stress; ``kappa = sqrt(2/3)`` (``UNIAXIAL``) makes it the
    uniaxial yield stress.
    """

    E: float
    nu: float
    sigma_y0: float
    H_kin: float = 0.0
    H_iso: float = 0.0
    regime: str = "plane-strain"
    kappa: float = HALF_SQRT2

    name = "mises"
    state_shapes = {"ep": (4,), "epbar": (), "alpha": (4,)}

    def __post_init__(self):
        self._validate_elastic()
        if not self.sigma_y0 > 0:
            raise ValueError("sigma_y0 must be positive")
        if self.H_kin < 0 or self.H_iso < 0:
            raise ValueError("hardening moduli must be non-negative")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    def radius(self, epbar):
        return self.kappa * (self.sigma_y0 + self.H_iso * epbar)

    def yield_function(self, sigma_mandel, state) -> np.ndarray:
        return norm(dev(sigma_mandel) - state["alpha"]) - self.radius(state["epbar"])

    def _update3d(self, state, eps_n, eps, dt, temperature):
        K, G = self.bulk, self.shear
        n = len(eps)
        e = dev(eps)
        s_tr = 2.0 * G * (e - state["ep"])
        X_tr = s_tr - state["alpha"]
        nX = norm(X_tr)
        f_tr = nX - self.radius(state["epbar"])

        ep = state["ep"].copy()
        epbar = state["epbar"].copy()
        alpha = state["alpha"].copy()
        s = s_tr.copy()
        C = np.broadcast_to(K * ONE_ONE + 2.0 * G * P_DEV, (n, 4, 4)).copy()

        pl = np.flatnonzero(f_tr > 1e-13 * self.sigma_y0)
        if pl.size:
            denom = 2.0 * G + self.H_kin + self.kappa ** 2 * self.H_iso
            dz = f_tr[pl] / denom
            N = X_tr[pl] / nX[pl, None]
            ep[pl] += dz[:, None] * N
            epbar[pl] += self.kappa * dz
            alpha[pl] = self.H_kin * ep[pl]
            s[pl] -= 2.0 * G * dz[:, None] * N
            NN = N[:, :, None] * N[:, None, :]
            c1 = 4.0 * G * G / denom
            c2 = 4.0 * G * G * dz / nX[pl]
            C[pl] -= c1 * NN + c2[:, None, None] * (P_DEV[None] - NN)

        sig = K * eps[:, :3].sum(1)[:, None] * ONE + s
        return sig, C, {"ep": ep, "epbar": epbar, "alpha": alpha}

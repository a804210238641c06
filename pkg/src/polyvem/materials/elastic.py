from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from polyvem.materials.base import ONE, ONE_ONE, P_DEV, Material, dev


@dataclass
class LinearElastic(Material):
    E: float
    nu: float
    regime: str = "plane-strain"

    name = "elastic"

    def __post_init__(self):
        self._validate_elastic()

    def _update3d(self, state, eps_n, eps, dt, temperature):
        K, G = self.bulk, self.shear
        sig = K * eps[:, :3].sum(1)[:, None] * ONE + 2.0 * G * dev(eps)
        C = np.broadcast_to(K * ONE_ONE + 2.0 * G * P_DEV, (len(eps), 4, 4)).copy()
        return sig, C, {}

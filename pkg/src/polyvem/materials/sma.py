"""Souza-type shape memory alloy model with a saturation-constrained return map.

Free energy ``psi = K/2 tr(eps_e)^2 + G |dev eps_e|^2 + beta <T - M_f> |e_tr|
+ h/2 |e_tr|^2`` with ``|e_tr| <= eps_L``, transformation function
``f(X) = |X| - sqrt(2/3) sigma_y0`` on ``X = s - alpha``.

Backward Euler makes ``X`` parallel to the flow direction, which lets the whole
local problem collapse onto one scalar unknown ``phi``, the total back-stress
stiffness in ``alpha = phi * e_tr``:

    phi = beta dT+ / |e_tr|_delta + h + 2 gamma / eps_L^2

For a given ``phi`` the return is explicit,

    Y = s_trial - phi e_n,   e_tr = e_n + (Y - R Y/|Y|) / (2G + phi),

and ``phi`` follows from either the unsaturated consistency condition
(``gamma = 0``) or the saturation condition ``|e_tr| = eps_L`` (``gamma >= 0``).
``|e|_delta = sqrt(|e|^2 + delta^2)`` regularizes the kink at ``e_tr = 0``;
before that, the exact solution ``e_tr = 0`` is detected from the
subdifferential condition ``|s - X| <= beta dT+`` and used when it applies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from polyvem.materials.base import ONE, ONE_ONE, P_DEV, Material, MaterialError, dev, norm

_MAX_ITER = 200


@dataclass
class SouzaSMA(Material):
    E: float
    nu: float
    eps_L: float
    M_f: float
    h: float
    beta: float
    sigma_y0: float
    regime: str = "plane-stress"

    name = "sma"
    state_shapes = {"etr": (4,), "alpha": (4,), "gamma": (), "dzeta": ()}

    def __post_init__(self):
        self._validate_elastic()
        if not self.eps_L > 0:
            raise ValueError("eps_L must be positive")
        if self.h < 0:
            raise ValueError("h must be non-negative")
        if self.beta < 0 or not self.sigma_y0 > 0:
            raise ValueError("beta must be >= 0 and sigma_y0 > 0")

    @property
    def radius(self) -> float:
        return np.sqrt(2.0 / 3.0) * self.sigma_y0

    @property
    def delta(self) -> float:
        return 1e-8 * self.eps_L

    def thermal_stiffness(self, temperature):
        return self.beta * np.maximum(np.asarray(temperature, dtype=float) - self.M_f, 0.0)

    # -- explicit return for a given phi -------------------------------------

    def _trial_return(self, phi, s_tr, en):
        G2 = 2.0 * self.shear
        Y = s_tr - phi[:, None] * en
        ny = np.maximum(norm(Y), 1e-300)
        u = Y / ny[:, None]
        den = G2 + phi
        e = en + (Y - self.radius * u) / den[:, None]
        uen = np.einsum("ni,ni->n", u, en)
        w = ((-en + self.radius * (en - u * uen[:, None]) / ny[:, None]) / den[:, None]
             - (Y - self.radius * u) / (den ** 2)[:, None])
        return e, w, Y, ny, u

    def _solve_unsaturated(self, s_tr, en, bT):
        """Root of ``F(rho) = |e(phi(rho))| - rho`` on ``[0, eps_L]``."""
        n = len(s_tr)
        lo = np.zeros(n)
        hi = np.full(n, self.eps_L)
        d2 = self.delta ** 2
        rho = np.clip(norm(en), 0.0, self.eps_L)
        done = np.zeros(n, dtype=bool)
        for _ in range(_MAX_ITER):
            phi = bT / np.sqrt(rho ** 2 + d2) + self.h
            e, w, *_ = self._trial_return(phi, s_tr, en)
            ne = norm(e)
            F = ne - rho
            done = np.abs(F) <= 1e-15 * np.maximum(rho, self.delta) + 1e-300
            done |= (hi - lo) <= 4e-16 * hi
            if done.all():
                break
            lo = np.where(F > 0, rho, lo)
            hi = np.where(F < 0, rho, hi)
            dne = np.einsum("ni,ni->n", e, w) / np.maximum(ne, 1e-300)
            dphi = -bT * rho / (rho ** 2 + d2) ** 1.5
            dF = dne * dphi - 1.0
            step = np.where(dF != 0, rho - F / np.where(dF != 0, dF, 1.0), 0.5 * (lo + hi))
            inside = (step > lo) & (step < hi)
            rho = np.where(done, rho, np.where(inside, step, 0.5 * (lo + hi)))
        if not done.all():
            raise MaterialError("SMA unsaturated return did not converge", np.flatnonzero(~done))
        return bT / np.sqrt(rho ** 2 + d2) + self.h

    def _solve_saturated(self, s_tr, en, phi_min):
        """Smallest ``phi >= phi_min`` with ``|e(phi)| = eps_L``."""
        eL = self.eps_L
        n = len(s_tr)
        lo = phi_min.copy()
        width = np.full(n, 2.0 * self.shear)
        hi = lo + width
        for _ in range(80):
            e, *_ = self._trial_return(hi, s_tr, en)
            over = norm(e) > eL
            if not over.any():
                break
            lo = np.where(over, hi, lo)
            width = np.where(over, 4.0 * width, width)
            hi = np.where(over, lo + width, hi)
        phi = lo.copy()
        done = np.zeros(n, dtype=bool)
        for _ in range(_MAX_ITER):
            e, w, *_ = self._trial_return(phi, s_tr, en)
            ne = norm(e)
            Gv = ne - eL
            done = (np.abs(Gv) <= 1e-15 * eL) | ((hi - lo) <= 4e-16 * hi)
            if done.all():
                break
            lo = np.where(Gv > 0, phi, lo)
            hi = np.where(Gv < 0, phi, hi)
            dG = np.einsum("ni,ni->n", e, w) / np.maximum(ne, 1e-300)
            step = phi - Gv / np.where(dG != 0, dG, -1.0)
            inside = (step > lo) & (step < hi) & (dG != 0)
            phi = np.where(done, phi, np.where(inside, step, 0.5 * (lo + hi)))
        if not done.all():
            raise MaterialError("SMA saturated return did not converge", np.flatnonzero(~done))
        return phi

    # -- update ----------------------------------------------------------------

    def _update3d(self, state, eps_n, eps, dt, temperature):
        K, G = self.bulk, self.shear
        R, eL, h = self.radius, self.eps_L, self.h
        n = len(eps)
        bT = self.thermal_stiffness(temperature)
        d2 = self.delta ** 2
        e_tot = dev(eps)
        en = state["etr"]
        s_tr = 2.0 * G * (e_tot - en)
        nen = norm(en)

        # exact austenite: e_tr = 0 solves the step when the back stress
        # s - X fits inside the subdifferential ball of radius bT
        s_full = 2.0 * G * e_tot
        n_e = en / np.maximum(nen, 1e-300)[:, None]
        zero = np.where(nen > 0.0, norm(s_full + R * n_e) < bT, norm(s_full) <= R + bT)

        # elastic check: the admissible back-stress stiffness closest to s_tr
        phi_min = bT / np.sqrt(eL ** 2 + d2) + h
        sat_n = nen >= eL * (1.0 - 1e-12)
        proj = np.einsum("ni,ni->n", s_tr, en) / np.maximum(nen ** 2, 1e-300)
        phi_n = np.where(sat_n, np.maximum(phi_min, proj), bT / np.sqrt(nen ** 2 + d2) + h)
        f_tr = norm(s_tr - phi_n[:, None] * en) - R
        elastic = (f_tr <= 1e-13 * R) | zero

        etr = en.copy()
        phi = phi_n.copy()
        gamma = np.where(sat_n & elastic, 0.5 * eL ** 2 * (phi_n - phi_min), 0.0)
        dzeta = np.zeros(n)
        C = np.broadcast_to(K * ONE_ONE + 2.0 * G * P_DEV, (n, 4, 4)).copy()

        act = np.flatnonzero(~elastic)
        if act.size:
            s_a, en_a, bT_a, pm_a = s_tr[act], en[act], bT[act], phi_min[act]
            phi_a = self._solve_unsaturated(s_a, en_a, bT_a)
            e_a, *_ = self._trial_return(phi_a, s_a, en_a)
            sat = norm(e_a) > eL
            if sat.any():
                ids = np.flatnonzero(sat)
                phi_a[ids] = self._solve_saturated(s_a[ids], en_a[ids], pm_a[ids])
            e_a, w, Y, ny, u = self._trial_return(phi_a, s_a, en_a)
            dz = (ny - R) / (2.0 * G + phi_a)
            if np.any(dz < -1e-12 * eL):
                raise MaterialError("SMA return produced a negative multiplier", act[dz < -1e-12 * eL])
            etr[act] = e_a
            phi[act] = phi_a
            dzeta[act] = dz
            gamma[act] = np.where(sat, 0.5 * eL ** 2 * (phi_a - pm_a), 0.0)

            # consistent tangent: de/ds_tr = A + w (x) dphi/ds_tr
            den = 2.0 * G + phi_a
            I4 = np.eye(4)[None]
            uu = u[:, :, None] * u[:, None, :]
            A = (I4 - R * (I4 - uu) / ny[:, None, None]) / den[:, None, None]
            ne = norm(e_a)
            g = np.where(sat[:, None], e_a,
                         (bT_a / (ne ** 2 + d2) ** 1.5)[:, None] * e_a)
            denom = np.where(sat, np.einsum("ni,ni->n", e_a, w),
                             1.0 + np.einsum("ni,ni->n", g, w))
            dphi = -np.einsum("nij,nj->ni", A, g) / denom[:, None]
            de = A + w[:, :, None] * dphi[:, None, :]
            C[act] -= 4.0 * G * G * de @ P_DEV

        alpha = phi[:, None] * etr
        z = np.flatnonzero(zero)
        if z.size:
            etr[z] = 0.0
            gamma[z] = 0.0
            dzeta[z] = nen[z]
            ns = np.maximum(norm(s_full[z]), 1e-300)
            alpha[z] = np.where((nen[z] > 0.0)[:, None], s_full[z] + R * n_e[z],
                                s_full[z] * np.maximum(0.0, 1.0 - R / ns)[:, None])

        s = 2.0 * G * (e_tot - etr)
        sig = K * eps[:, :3].sum(1)[:, None] * ONE + s
        return sig, C, {"etr": etr, "alpha": alpha, "gamma": gamma, "dzeta": dzeta}

    def kt_residuals(self, sigma_mandel, state, temperature) -> dict[str, np.ndarray]:
        """Kuhn-Tucker diagnostics recomputed from the stored state."""
        e = state["etr"]
        ne = norm(e)
        bT = self.thermal_stiffness(temperature)
        X = dev(sigma_mandel) - state["alpha"]
        f = norm(X) - self.radius
        # the back stress must lie in the subdifferential at e_tr = 0
        excess = np.where(ne > 0.0, 0.0, np.maximum(norm(state["alpha"]) - bT, 0.0) / self.radius)
        c = ne ** 2 / self.eps_L ** 2 - 1.0
        return {
            "f": f / self.radius,
            "dzeta_f": state["dzeta"] * f / self.radius,
            "gamma_c": state["gamma"] * c,
            "c": c,
            "zero_excess": excess,
        }

"""Lowest-level transverse orbitals in a strong magnetic field.

The state with magnetic quantum number label m (true angular momentum -m)
is ``Phi_m(rho, phi) = c_m rho^m exp(-i m phi) exp(-gamma rho^2 / 4)`` with
``c_m = sqrt(gamma^(m+1) / (2^(m+1) pi m!))``; gamma is the field in atomic
units (see units.FieldStrength.gamma). All states of the lowest level carry
transverse energy gamma/2 regardless of m.

Also provides the transverse form factors that reduce 3D Coulomb integrals
over these orbitals to 1D integrals (kernels module).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, gammaln


def norm_const(m: int, gamma: float) -> float:
    """Normalization sqrt(gamma^(m+1) / (2^(m+1) pi m!)), computed in log form."""
    return math.exp(
        0.5 * ((m + 1) * (math.log(gamma) - math.log(2.0)) - math.log(math.pi)
               - gammaln(m + 1))
    )


@dataclass(frozen=True)
class LandauOrbital:
    m: int
    gamma: float

    def __post_init__(self):
        if self.m < 0 or self.gamma <= 0:
            raise ValueError(f"need m >= 0 and gamma > 0, got m={self.m}, gamma={self.gamma}")

    @property
    def mean_rho2(self) -> float:
        return 2.0 * (self.m + 1) / self.gamma


def eval_transverse(orbital: LandauOrbital, rho, phi):
    """Complex amplitude Phi_m(rho, phi); vectorized over rho/phi arrays."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be non-negative")
    m, g = orbital.m, orbital.gamma
    amp = norm_const(m, g) * rho**m * np.exp(-g * rho**2 / 4.0)
    return amp * np.exp(-1j * m * np.asarray(phi, dtype=float))


def transverse_value_grad_lap(ms, gamma: float, x, y):
    """Batched transverse factors for the Slater matrix.

    For each orbital label in ``ms`` evaluated at Cartesian (x, y):
    returns ``(P, dPdx, dPdy, lapP)`` where ``lapP`` is the full 2D
    Laplacian. Shapes broadcast to ``x.shape + (len(ms),)``. Uses
    ``w = x - i y`` so that ``rho^m e^{-i m phi} = w^m`` (no rho=0
    singularities in the derivative formulas).
    """
    ms = np.asarray(ms, dtype=int)
    x = np.asarray(x, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    w = x - 1j * y
    rho2 = x * x + y * y
    c = np.array([norm_const(int(m), gamma) for m in ms])
    gauss = np.exp(-gamma * rho2 / 4.0)
    wm = w ** ms
    wm1 = w ** np.maximum(ms - 1, 0)  # m * w^(m-1) with the m=0 term killed below
    base = c * gauss
    p = base * wm
    dpdx = base * (ms * wm1 - 0.5 * gamma * x * wm)
    dpdy = base * (-1j * ms * wm1 - 0.5 * gamma * y * wm)
    lap = (gamma * gamma * rho2 / 4.0 - (ms + 1) * gamma) * p
    return p, dpdx, dpdy, lap


def form_factor(m: int, q, gamma: float):
    """Transverse density form factor S_m(q) = L_m(t) exp(-t), t = q^2/(2 gamma).

    This is the 2D Fourier transform of |Phi_m|^2; it reduces the Coulomb
    interaction with one smeared transverse density to a 1D q-integral.
    """
    t = np.asarray(q, dtype=float) ** 2 / (2.0 * gamma)
    return eval_genlaguerre(m, 0, t) * np.exp(-t)


def mixed_form_factor(m1: int, m2: int, q, gamma: float):
    """Hankel transform (order |m1-m2|) of the mixed radial density Phi_m1 Phi_m2.

    Closed form: with nu = |m1-m2|, n = min(m1, m2), t = q^2/(2 gamma),
       T(q) = A q^nu exp(-t) L_n^(nu)(t),
    normalized so T(0) = delta_{m1 m2}. Squared under the q-integral it
    yields the exchange interaction of the transverse pair.
    """
    q = np.asarray(q, dtype=float)
    if m1 < m2:
        m1, m2 = m2, m1
    nu, n = m1 - m2, m2
    t = q * q / (2.0 * gamma)
    log_a = (
        0.5 * (gammaln(n + 1) - gammaln(m1 + 1))
        - nu * 0.5 * (math.log(2.0) + math.log(gamma))
    )
    pref = np.exp(log_a + nu * np.log(np.where(q > 0, q, 1.0)))
    pref = np.where((q == 0) & (nu > 0), 0.0, pref)
    if nu == 0:
        pref = np.exp(log_a) * np.ones_like(q)
    return pref * np.exp(-t) * eval_genlaguerre(n, nu, t)

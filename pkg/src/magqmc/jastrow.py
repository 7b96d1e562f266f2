"""Pair/nuclear correlation factor exp(-U) multiplying the determinant.

U mixes a saturating nuclear term and a pair term,

    U = -1/4 sum_{i<j} r_ij/(1 + s r_ij) + Z sum_i r_i/(1 + s r_i),

with s = sqrt(beta). The coefficients fix both cusps of log|Psi_G|
(-Z toward the nucleus, +1/4 for same-spin pairs) independently of s;
s sets the range, of the order of the transverse extent of the orbitals,
beyond which U saturates and the determinant is left untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TINY = 1e-30


@dataclass(frozen=True)
class JastrowParams:
    beta: float
    z_charge: float
    n_electrons: int

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def s(self) -> float:
        return self.beta**0.5

    @property
    def nuclear_saturation(self) -> float:
        """Limit of the one-electron term as r -> infinity: Z / sqrt(beta)."""
        return self.z_charge / self.s


def jastrow_u(params: JastrowParams, r_elec: np.ndarray):
    """U, its per-electron gradient and its total Laplacian.

    ``r_elec`` has shape (..., N, 3). Returns ``(u, grad, lap)`` with
    shapes (...,), (..., N, 3), (...,). Coincident points give finite U;
    the gradient/Laplacian there are left to the caller's move rejection
    (they carry the 1/r cusp terms by construction).
    """
    r = np.asarray(r_elec, dtype=float)
    n = r.shape[-2]
    s = params.s
    zc = params.z_charge

    ri = np.sqrt(np.sum(r * r, axis=-1))  # (..., N)
    ri_safe = np.maximum(ri, _TINY)
    den = 1.0 + s * ri
    u = zc * np.sum(ri / den, axis=-1)
    # d/dr [Z r/(1+s r)] = Z/(1+s r)^2 ; lap = v'' + 2 v'/r
    vp = zc / den**2
    grad = (vp / ri_safe)[..., None] * r
    lap = np.sum(-2.0 * zc * s / den**3 + 2.0 * vp / ri_safe, axis=-1)

    if n > 1:
        diff = r[..., :, None, :] - r[..., None, :, :]  # (..., N, N, 3)
        rij = np.sqrt(np.sum(diff * diff, axis=-1))
        iu, ju = np.triu_indices(n, k=1)
        rp = rij[..., iu, ju]
        denp = 1.0 + s * rp
        u = u - 0.25 * np.sum(rp / denp, axis=-1)
        # pair term derivative u'(r) = -1/4 (1+s r)^-2
        rij_safe = np.maximum(rij, _TINY)
        up = -0.25 / (1.0 + s * rij)**2
        np.einsum("...ii->...i", up)[...] = 0.0  # no self-pair
        grad = grad + np.sum((up / rij_safe)[..., None] * diff, axis=-2)
        upp = 0.5 * s / (1.0 + s * rij)**3
        pair_lap = upp + 2.0 * up / rij_safe
        np.einsum("...ii->...i", pair_lap)[...] = 0.0
        lap = lap + np.sum(pair_lap, axis=(-2, -1))

    return u, grad, lap

"""Complex Slater determinant of transverse x longitudinal orbitals.

Evaluation is batched over walker configurations: the orbital matrix
A[w, i, nu] = P_nu(x_i, y_i) * f_nu(z_i) is built for every walker w at
once, the log-determinant comes from a pivoted factorization (slogdet),
and the per-electron gradient and Laplacian rows follow from the inverse
matrix. Everything stays in log domain, so |det| spanning hundreds of
orders of magnitude is routine; an exactly singular or underflowed matrix
is reported through the ``ok`` mask ("on node") instead of propagating
non-finite values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .landau import transverse_value_grad_lap


class GuidingOrbitals(Protocol):
    """What the determinant needs from an orbital set."""

    gamma: float

    @property
    def ms(self) -> np.ndarray: ...

    def longitudinal(self, z): ...


@dataclass
class SlaterEval:
    log_abs: np.ndarray      # (W,)
    phase: np.ndarray        # (W,) in (-pi, pi]
    grad: np.ndarray         # (W, N, 3) complex: rows of grad log det
    lap: np.ndarray          # (W, N) complex: (del_i^2 det)/det
    ok: np.ndarray           # (W,) bool: False on or numerically under a node


def slater_eval(orbitals: GuidingOrbitals, r_elec: np.ndarray) -> SlaterEval:
    """Determinant value/derivatives at configurations (..., N, 3)."""
    r = np.asarray(r_elec, dtype=float)
    squeeze = r.ndim == 2
    if squeeze:
        r = r[None]
    w_, n = r.shape[0], r.shape[1]
    ms = np.asarray(orbitals.ms, dtype=int)
    if len(ms) != n:
        raise ValueError(f"{n} electrons for {len(ms)} orbitals")

    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    p, px, py, plap = transverse_value_grad_lap(ms, orbitals.gamma, x, y)
    f, f1, f2 = orbitals.longitudinal(z)

    a = p * f
    dax = px * f
    day = py * f
    daz = p * f1
    alap = plap * f + p * f2

    sign, log_abs = np.linalg.slogdet(a)
    ok = np.isfinite(log_abs) & (sign != 0)

    safe = np.where(ok[:, None, None], a, np.eye(n)[None])
    ainv = np.linalg.inv(safe)  # (W, nu, i) after transpose convention below

    # grad_i log det = sum_nu Ainv[nu, i] * grad A[i, nu]
    grad = np.stack(
        [np.einsum("wvi,wiv->wi", ainv, d) for d in (dax, day, daz)], axis=-1
    )
    lap = np.einsum("wvi,wiv->wi", ainv, alap)

    out = SlaterEval(
        log_abs=log_abs,
        phase=np.angle(sign),
        grad=grad,
        lap=lap,
        ok=ok,
    )
    if squeeze:
        return SlaterEval(out.log_abs[0], out.phase[0], out.grad[0], out.lap[0], out.ok[0])
    return out

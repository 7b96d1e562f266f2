"""Self-consistent longitudinal Hartree-Fock on the B-spline basis.

Every electron occupies a product orbital: a transverse lowest-level state
with label m times an unknown longitudinal function f(z). All electrons
share one spin projection, so each feels the direct interaction of every
other and the full same-spin exchange. The effective 1D Fock operator of
the m-channel is

    F_m = -1/2 d^2/dz^2 + V_m(z) + U_dir(z) - K,

with the nuclear and two-body kernels taken from a KernelTable, U_dir the
local direct potential summed over occupied orbitals and K the nonlocal
exchange, assembled as a full Galerkin matrix. Orbitals within a channel
are picked by longitudinal node count, not by eigenvalue index.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .bsplines import SplineBasis, graded_breakpoints
from .config import Occupation, RunConfig
from .kernels import KernelTable
from .units import EnergyValue

logger = logging.getLogger(__name__)

ORBITAL_FORMAT = "magqmc-orbitals/1"


class SCFError(RuntimeError):
    """SCF failed to converge; carries the energy history."""

    def __init__(self, message, energy_history):
        super().__init__(message)
        self.energy_history = list(energy_history)


class BasisError(RuntimeError):
    """Singular overlap or other basis-construction defect."""


def basis_for_config(cfg: RunConfig) -> SplineBasis:
    # innermost elements must resolve the transverse smearing scale of the
    # potentials, 1/sqrt(gamma)
    bp = graded_breakpoints(
        cfg.hf_domain, cfg.hf_elements, first_element=0.25 / cfg.field.gamma**0.5
    )
    return SplineBasis(bp, order=cfg.hf_order)


def count_nodes(vals: np.ndarray, rel_tol: float = 1e-3, mass_window: float = 0.999) -> int:
    """Sign changes of a uniformly sampled bound-state function.

    Counting is restricted to the window carrying ``mass_window`` of the
    probability and to samples above a relative floor: basis-truncation
    ringing in the exponentially small tails would otherwise register as
    spurious nodes, while genuine lobes always carry O(1) mass. Crossings
    survive the floor because the sign still flips across a node.
    """
    c = np.cumsum(vals * vals)
    c /= c[-1]
    lo = int(np.searchsorted(c, 0.5 * (1.0 - mass_window)))
    hi = int(np.searchsorted(c, 1.0 - 0.5 * (1.0 - mass_window)))
    v = vals[lo : hi + 1]
    v = v[np.abs(v) > rel_tol * np.max(np.abs(v))]
    return int(np.sum(np.sign(v[1:]) != np.sign(v[:-1])))


def solve_channel(
    basis: SplineBasis,
    h_matrix: np.ndarray,
    s_matrix: np.ndarray,
    n_states: int,
    residual_tol: float = 1e-10,
):
    """Lowest generalized eigenpairs of (h, s); coefficient columns are
    s-orthonormal. Verifies the Galerkin residual of each returned pair."""
    try:
        w, v = eigh(h_matrix, s_matrix, subset_by_index=(0, n_states - 1))
    except np.linalg.LinAlgError as exc:
        raise BasisError(f"generalized eigensolve failed: {exc}") from exc
    scale = np.linalg.norm(h_matrix)
    for k in range(n_states):
        r = np.linalg.norm(h_matrix @ v[:, k] - w[k] * (s_matrix @ v[:, k]))
        if r / (scale * np.linalg.norm(v[:, k])) > residual_tol:
            raise BasisError(
                f"eigenpair residual {r:.2e} exceeds {residual_tol:g} * |H|;"
                " overlap matrix may be near-singular"
            )
    return w, v


@dataclass
class OrbitalSet:
    """Converged guiding orbitals plus the total-energy bookkeeping."""

    basis: SplineBasis
    beta: float
    gamma: float
    z_charge: float
    occupations: tuple[Occupation, ...]
    coeffs: np.ndarray  # (n_orb, n_funcs)
    eigenvalues: np.ndarray  # (n_orb,)
    spin_zeeman_included: bool
    e_total: float = 0.0
    energy_parts: dict = field(default_factory=dict)
    scf_energies: tuple = ()

    _bsplines: tuple = field(default=None, repr=False, compare=False)

    @property
    def n_orbitals(self) -> int:
        return len(self.occupations)

    @property
    def ms(self) -> np.ndarray:
        return np.array([o.m for o in self.occupations], dtype=int)

    def _splines(self):
        if self._bsplines is None:
            b0 = self.basis.coefficient_spline(self.coeffs.T)
            object.__setattr__(self, "_bsplines", (b0, b0.derivative(1), b0.derivative(2)))
        return self._bsplines

    def longitudinal(self, z):
        """(f, f', f'') for every orbital, shape z.shape + (n_orb,); 0 outside."""
        z = np.asarray(z, dtype=float)
        b0, b1, b2 = self._splines()
        return (np.nan_to_num(b0(z)), np.nan_to_num(b1(z)), np.nan_to_num(b2(z)))

    def eval_longitudinal(self, nu: int, z):
        """(value, first, second derivative) of orbital ``nu`` at z."""
        f, f1, f2 = self.longitudinal(z)
        return f[..., nu], f1[..., nu], f2[..., nu]

    def total_energy(self) -> EnergyValue:
        return EnergyValue(self.e_total)


class MeanFieldWorkspace:
    """Precomputed quadrature-grid kernel matrices for SCF assembly."""

    def __init__(self, basis: SplineBasis, kernels: KernelTable, occupations):
        self.basis = basis
        self.kernels = kernels
        self.occupations = tuple(occupations)
        self.ms = sorted(set(o.m for o in self.occupations))
        zq = basis.zq
        dz = np.abs(zq[:, None] - zq[None, :])
        self.v_quad = {m: kernels.nuclear(m, zq) for m in self.ms}
        self.d_quad = {}
        self.x_quad = {}
        for i, a in enumerate(self.ms):
            for b in self.ms[i:]:
                self.d_quad[(a, b)] = kernels.direct(a, b, dz)
                self.x_quad[(a, b)] = kernels.exchange(a, b, dz)

    def pair_d(self, a, b):
        return self.d_quad[(a, b) if a <= b else (b, a)]

    def pair_x(self, a, b):
        return self.x_quad[(a, b) if a <= b else (b, a)]

    def mean_field(self, f_quad: np.ndarray):
        """Direct potentials and exchange kernels on the quadrature grid.

        ``f_quad[k]`` holds orbital k sampled at the quadrature nodes.
        Returns ({m: U_dir vector}, {m: G matrix}) including the self terms,
        whose direct and exchange energy contributions cancel identically.
        """
        wq = self.basis.wq
        udir = {m: np.zeros_like(self.basis.zq) for m in self.ms}
        gx = {m: np.zeros((len(wq), len(wq))) for m in self.ms}
        for k, occ in enumerate(self.occupations):
            dens = wq * f_quad[k] ** 2
            for m in self.ms:
                udir[m] += self.pair_d(m, occ.m) @ dens
                gx[m] += f_quad[k][:, None] * self.pair_x(m, occ.m) * f_quad[k][None, :]
        return udir, gx

    def energy(self, f_quad: np.ndarray, kinetic_terms: np.ndarray):
        """Total-energy pieces from sampled orbitals (no transverse/spin part)."""
        wq = self.basis.wq
        n = len(self.occupations)
        e_nuc = 0.0
        for k, occ in enumerate(self.occupations):
            e_nuc += wq @ (self.v_quad[occ.m] * f_quad[k] ** 2)
        e_dir = 0.0
        e_exc = 0.0
        for a in range(n):
            for b in range(n):
                ma, mb = self.occupations[a].m, self.occupations[b].m
                da = wq * f_quad[a] ** 2
                db = wq * f_quad[b] ** 2
                e_dir += 0.5 * da @ self.pair_d(ma, mb) @ db
                ova = wq * f_quad[a] * f_quad[b]
                e_exc += 0.5 * ova @ self.pair_x(ma, mb) @ ova
        e_kin = float(np.sum(kinetic_terms))
        return {
            "kinetic": e_kin,
            "nuclear": float(e_nuc),
            "direct": float(e_dir),
            "exchange": float(e_exc),
            "longitudinal": e_kin + float(e_nuc) + float(e_dir) - float(e_exc),
        }


def scf(
    cfg: RunConfig,
    kernels: KernelTable,
    basis: SplineBasis | None = None,
    e_tol: float = 1e-9,
    orb_tol: float = 1e-7,
    max_iter: int = 200,
    mix: float = 0.7,
) -> OrbitalSet:
    """Iterate the longitudinal Fock equations to self-consistency.

    The mean field (direct potential + exchange kernel) is linearly damped
    between iterations; on detected energy oscillation the new-field weight
    is halved. Convergence requires both the energy and the orbitals to
    settle.
    """
    if basis is None:
        basis = basis_for_config(cfg)
    ws = MeanFieldWorkspace(basis, kernels, cfg.occupations)
    s_mat = basis.overlap()
    t_mat = basis.kinetic()
    v_mats = {m: basis.potential_matrix(ws.v_quad[m]) for m in ws.ms}

    by_channel: dict[int, list[int]] = {}
    for k, occ in enumerate(cfg.occupations):
        by_channel.setdefault(occ.m, []).append(k)

    n_orb = len(cfg.occupations)
    coeffs = np.zeros((n_orb, basis.n_funcs))
    eigvals = np.zeros(n_orb)
    zfine = np.linspace(*basis.domain, 2001)[1:-1]

    def solve_all(udir, gx):
        new_c = np.zeros_like(coeffs)
        new_e = np.zeros(n_orb)
        for m in sorted(by_channel):
            h = t_mat + v_mats[m]
            if udir is not None:
                h = h + basis.potential_matrix(udir[m]) - basis.nonlocal_matrix(gx[m])
            want = {cfg.occupations[k].nu_z: k for k in by_channel[m]}
            n_solve = min(max(want) + 8, basis.n_funcs)
            w, v = solve_channel(basis, h, s_mat, n_solve)
            fine = basis.design_matrix(zfine) @ v
            found = {}
            for col in range(n_solve):
                nodes = count_nodes(fine[:, col])
                if nodes in want and nodes not in found:
                    found[nodes] = col
            missing = sorted(set(want) - set(found))
            if missing:
                raise SCFError(
                    f"channel m={m}: no eigenvector with node count(s) {missing} "
                    f"among the lowest {n_solve}", energies)
            for nu_z, k in want.items():
                col = found[nu_z]
                vec = v[:, col]
                peak = np.argmax(np.abs(fine[:, col]))
                if fine[peak, col] < 0:
                    vec = -vec
                new_c[k] = vec
                new_e[k] = w[col]
        return new_c, new_e

    energies: list[float] = []
    udir_mixed, gx_mixed = None, None
    cur_mix = mix
    f_quad = None
    for it in range(max_iter):
        coeffs, eigvals = solve_all(udir_mixed, gx_mixed)
        f_quad_new = coeffs @ basis.bq.T
        kin = np.einsum("ki,ij,kj->k", coeffs, t_mat, coeffs)
        parts = ws.energy(f_quad_new, kin)
        energies.append(parts["longitudinal"])

        orb_change = np.inf
        if f_quad is not None:
            align = np.sign(np.sum(basis.wq * f_quad * f_quad_new, axis=1))
            diff = f_quad_new - align[:, None] * f_quad
            orb_change = float(np.max(np.sqrt(np.sum(basis.wq * diff**2, axis=1))))
        f_quad = f_quad_new

        if it >= 2:
            d_now = energies[-1] - energies[-2]
            d_prev = energies[-2] - energies[-3]
            if abs(d_now) < e_tol and orb_change < orb_tol:
                logger.info("scf converged in %d iterations, E=%.10f", it + 1, energies[-1])
                break
            if abs(d_now) > abs(d_prev) > e_tol and d_now * d_prev < 0:
                cur_mix = max(0.05, 0.5 * cur_mix)
                logger.info("scf oscillation at iter %d; new-field weight -> %.3f", it, cur_mix)

        udir_new, gx_new = ws.mean_field(f_quad)
        if udir_mixed is None:
            udir_mixed, gx_mixed = udir_new, gx_new
        else:
            udir_mixed = {m: cur_mix * udir_new[m] + (1 - cur_mix) * udir_mixed[m]
                          for m in udir_new}
            gx_mixed = {m: cur_mix * gx_new[m] + (1 - cur_mix) * gx_mixed[m]
                        for m in gx_new}
    else:
        raise SCFError(
            f"no SCF convergence after {max_iter} iterations "
            f"(last dE={energies[-1] - energies[-2]:.3e})", energies)

    parts["transverse_spin"] = (
        0.0 if cfg.spin_zeeman_included else 0.5 * kernels.gamma * n_orb
    )
    e_total = parts["longitudinal"] + parts["transverse_spin"]
    return OrbitalSet(
        basis=basis,
        beta=cfg.field.beta,
        gamma=kernels.gamma,
        z_charge=float(cfg.z),
        occupations=tuple(cfg.occupations),
        coeffs=coeffs,
        eigenvalues=eigvals,
        spin_zeeman_included=cfg.spin_zeeman_included,
        e_total=float(e_total),
        energy_parts=parts,
        scf_energies=tuple(energies),
    )


def hf_total_energy(orbitals: OrbitalSet, kernels: KernelTable) -> EnergyValue:
    """Recompute the total energy functional from the stored orbitals."""
    ws = MeanFieldWorkspace(orbitals.basis, kernels, orbitals.occupations)
    f_quad = orbitals.coeffs @ orbitals.basis.bq.T
    kin = np.einsum("ki,ij,kj->k", orbitals.coeffs, orbitals.basis.kinetic(), orbitals.coeffs)
    parts = ws.energy(f_quad, kin)
    extra = 0.0 if orbitals.spin_zeeman_included else 0.5 * orbitals.gamma * orbitals.n_orbitals
    return EnergyValue(parts["longitudinal"] + extra)


# ---------------------------------------------------------------------------
# orbital file I/O


def save_orbitals(path, orbitals: OrbitalSet, physics_hash: str = "", config_hash: str = "") -> None:
    basis = orbitals.basis
    arrays = {
        "breakpoints": basis.breakpoints,
        "coeffs": orbitals.coeffs,
        "eigenvalues": orbitals.eigenvalues,
        "scf_energies": np.asarray(orbitals.scf_energies),
    }
    check = hashlib.sha256()
    for name in sorted(arrays):
        check.update(np.ascontiguousarray(arrays[name]).tobytes())
    meta = {
        "format": ORBITAL_FORMAT,
        "beta": orbitals.beta,
        "gamma": orbitals.gamma,
        "z_charge": orbitals.z_charge,
        "occupations": [list(o) for o in orbitals.occupations],
        "spin_zeeman_included": orbitals.spin_zeeman_included,
        "order": basis.order,
        "quad_points": basis.quad_points,
        "center_multiplicity": basis.center_multiplicity,
        "e_total": orbitals.e_total,
        "energy_parts": orbitals.energy_parts,
        "physics_hash": physics_hash,
        "config_hash": config_hash,
        "checksum": check.hexdigest(),
    }
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)


def load_orbitals(path, expect_physics_hash: str | None = None) -> OrbitalSet:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != ORBITAL_FORMAT:
            raise ValueError(f"{path}: not an orbital file (format={meta.get('format')})")
        if expect_physics_hash and meta.get("physics_hash") != expect_physics_hash:
            raise ValueError(
                f"{path}: orbital file physics hash {meta.get('physics_hash')} does not "
                f"match the active configuration ({expect_physics_hash})"
            )
        arrays = {name: data[name] for name in data.files if name != "meta"}
    check = hashlib.sha256()
    for name in sorted(arrays):
        check.update(np.ascontiguousarray(arrays[name]).tobytes())
    if check.hexdigest() != meta["checksum"]:
        raise ValueError(f"{path}: checksum mismatch (corrupted orbital file)")
    basis = SplineBasis(
        arrays["breakpoints"],
        order=meta["order"],
        quad_points=meta["quad_points"],
        center_multiplicity=meta["center_multiplicity"],
    )
    return OrbitalSet(
        basis=basis,
        beta=meta["beta"],
        gamma=meta["gamma"],
        z_charge=meta["z_charge"],
        occupations=tuple(Occupation(*o) for o in meta["occupations"]),
        coeffs=arrays["coeffs"],
        eigenvalues=arrays["eigenvalues"],
        spin_zeeman_included=meta["spin_zeeman_included"],
        e_total=meta["e_total"],
        energy_parts=meta["energy_parts"],
        scf_energies=tuple(arrays["scf_energies"]),
    )

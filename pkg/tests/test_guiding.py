import numpy as np
import pytest

from magqmc.guiding import GuidingFunction, Hamiltonian
from magqmc.jastrow import JastrowParams
from magqmc.oracles import separable_test_hamiltonian


@pytest.fixture
def he_r0():
    rng = np.random.default_rng(31)
    return rng.standard_normal((1, 2, 3)) * np.array([0.05, 0.05, 0.2])


def det_only(guiding):
    return GuidingFunction(guiding.orbitals, guiding.hamiltonian, None)


@pytest.mark.parametrize("n_el,spin_flag", [(1, True), (2, True), (1, False)])
def test_zero_variance_for_exact_guiding(n_el, spin_flag):
    case = separable_test_hamiltonian(
        gamma=9.0, omega=2.5, n_electrons=n_el, spin_zeeman_included=spin_flag
    )
    gf = GuidingFunction(case.orbitals, case.hamiltonian())
    rng = np.random.default_rng(32)
    r = rng.standard_normal((200, n_el, 3)) * 0.5
    ev = gf.evaluate(r)
    assert np.max(np.abs(ev.e_loc - case.exact_energy)) < 1e-8
    assert np.max(np.abs(ev.e_loc.imag)) < 1e-10


def test_drift_and_phase_gradient_match_finite_differences(he_guiding, he_r0):
    ev = he_guiding.evaluate(he_r0)
    h = 1e-6
    for i in range(2):
        for k in range(3):
            rp, rm = he_r0.copy(), he_r0.copy()
            rp[0, i, k] += h
            rm[0, i, k] -= h
            evp, evm = he_guiding.evaluate(rp), he_guiding.evaluate(rm)
            fd_log = (evp.log_abs[0] - evm.log_abs[0]) / (2 * h)
            fd_phase = (evp.phase[0] - evm.phase[0]) / (2 * h)
            assert ev.drift[0, i, k] == pytest.approx(fd_log, rel=1e-6, abs=1e-8)
            assert ev.phase_grad[0, i, k] == pytest.approx(fd_phase, rel=1e-6, abs=1e-8)


def test_log_laplacian_consistency(he_guiding, he_r0):
    from magqmc.jastrow import jastrow_u
    from magqmc.slater import slater_eval

    det = slater_eval(he_guiding.orbitals, he_r0)
    _, _, lap_u = jastrow_u(he_guiding.jastrow, he_r0)
    analytic = float(
        np.real(np.sum(det.lap[0]) - np.sum(det.grad[0] ** 2)) - lap_u[0]
    )
    h = 1e-6
    fd = 0.0
    base = he_guiding.evaluate(he_r0).log_abs[0]
    for i in range(2):
        for k in range(3):
            rp, rm = he_r0.copy(), he_r0.copy()
            rp[0, i, k] += h
            rm[0, i, k] -= h
            fd += (
                he_guiding.evaluate(rp).log_abs[0]
                - 2 * base
                + he_guiding.evaluate(rm).log_abs[0]
            ) / h**2
    assert analytic == pytest.approx(fd, rel=1e-4)


def _even_slope(gf, r0, electron, radii, rng, n_dirs=8):
    """Fitted d log|Psi| / dr of the direction-even part as r_electron -> 0."""
    base_cfg = r0.copy()
    base_cfg[0, electron] = 0.0
    base = gf.evaluate(base_cfg).log_abs[0]
    slopes = []
    for r in radii:
        vals = []
        for _ in range(n_dirs):
            d = rng.standard_normal(3)
            d /= np.linalg.norm(d)
            rp, rm = base_cfg.copy(), base_cfg.copy()
            rp[0, electron] = d * r
            rm[0, electron] = -d * r
            vals.append(0.5 * (gf.evaluate(rp).log_abs[0] + gf.evaluate(rm).log_abs[0]))
        slopes.append((np.mean(vals) - base) / r)
    return np.polyfit(radii, slopes, 2)[-1]


def test_nuclear_cusp_of_full_guiding(he_guiding, he_r0):
    rng = np.random.default_rng(33)
    radii = np.array([1e-3, 1e-4, 1e-5])
    z_charge = he_guiding.hamiltonian.nuclear_charge
    # the determinant is smooth toward the nucleus; the cusp comes from e^{-U}
    det_slope = _even_slope(det_only(he_guiding), he_r0, 0, radii, rng)
    assert abs(det_slope) < 0.01
    full_slope = _even_slope(he_guiding, he_r0, 0, radii, rng)
    assert full_slope == pytest.approx(-z_charge, abs=0.02)


def test_pair_cusp_of_full_guiding(he_guiding, he_r0):
    rng = np.random.default_rng(34)
    radii = np.array([1e-3, 1e-4, 1e-5])
    d = rng.standard_normal(3)
    d /= np.linalg.norm(d)

    def pair_slope(gf):
        slopes = []
        for r in radii:
            vals = []
            for sign in (1.0, -1.0):
                cfg = he_r0.copy()
                cfg[0, 1] = cfg[0, 0] + sign * d * r
                vals.append(gf.evaluate(cfg).log_abs[0])
            # same-spin pair: determinant vanishes linearly; remove log r
            slopes.append(0.5 * (vals[0] + vals[1]) - np.log(r))
        return np.polyfit(radii, np.asarray(slopes), 2)[-2]

    det_val = pair_slope(det_only(he_guiding))
    full_val = pair_slope(he_guiding)
    assert full_val - det_val == pytest.approx(0.25, abs=1e-6)
    assert full_val == pytest.approx(0.25, abs=0.02)


def test_full_guiding_antisymmetry(he_guiding):
    rng = np.random.default_rng(35)
    r = rng.standard_normal((1, 2, 3)) * 0.2
    swapped = r[:, ::-1].copy()
    a = he_guiding.evaluate(r)
    b = he_guiding.evaluate(swapped)
    assert b.log_abs[0] == pytest.approx(a.log_abs[0], abs=1e-10)
    assert (b.phase[0] - a.phase[0]) % (2 * np.pi) == pytest.approx(np.pi, abs=1e-10)


def test_coincidence_flagged(he_guiding):
    r = np.zeros((1, 2, 3))
    r[0, 1] = [0.1, 0.0, 0.1]
    r[0, 0] = [0.0, 0.0, 0.0]  # on the nucleus
    ev = he_guiding.evaluate(r)
    assert not ev.ok[0]
    r2 = np.full((1, 2, 3), 0.1)  # coincident electrons
    assert not he_guiding.evaluate(r2).ok[0]


def test_potential_hand_value():
    ham = Hamiltonian(gamma=1.0, nuclear_charge=2.0)
    r = np.array([[[1.0, 0, 0], [0, 0, 2.0]]])
    v = ham.potential(r)
    rij = np.sqrt(1.0 + 4.0)
    assert v[0] == pytest.approx(-2.0 / 1.0 - 2.0 / 2.0 + 1.0 / rij)


def test_field_parameter_mismatch_rejected():
    case = separable_test_hamiltonian(gamma=4.0, omega=1.0)
    bad = Hamiltonian(gamma=5.0, nuclear_charge=0.0, include_pair=False)
    with pytest.raises(ValueError, match="field"):
        GuidingFunction(case.orbitals, bad)


def test_paramagnetic_term_uses_total_angular_momentum(he_guiding):
    assert he_guiding.m_total == 1  # m = 0 and m = 1 occupied
    case = separable_test_hamiltonian(gamma=4.0, omega=1.0, n_electrons=3)
    gf = GuidingFunction(case.orbitals, case.hamiltonian())
    assert gf.m_total == 0 + 1 + 2

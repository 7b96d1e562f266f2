import numpy as np
import pytest
from scipy.linalg import eigh

from magqmc.bsplines import SplineBasis, graded_breakpoints


@pytest.fixture(scope="module")
def basis():
    return SplineBasis(graded_breakpoints(8.0, 12, first_element=0.05), order=6)


def test_breakpoints_symmetric_and_graded():
    bp = graded_breakpoints(10.0, 15, first_element=0.02)
    assert np.allclose(bp, -bp[::-1])
    steps = np.diff(bp[15:])
    assert steps[0] == pytest.approx(0.02, rel=1e-6)
    assert np.all(np.diff(steps) > 0)


def test_knots_clamped(basis):
    p = basis.degree
    assert np.all(np.diff(basis.knots) >= 0)
    assert np.all(basis.knots[: p + 1] == basis.breakpoints[0])
    assert np.all(basis.knots[-(p + 1):] == basis.breakpoints[-1])


def test_partition_of_unity(basis):
    z = np.linspace(-7.99, 7.99, 601)
    assert np.allclose(basis.partition_of_unity(z), 1.0, atol=1e-12)


def test_dirichlet_restriction_vanishes_at_ends(basis):
    edge = basis.design_matrix(np.array(basis.domain))
    assert np.allclose(edge, 0.0, atol=1e-14)


def test_design_derivatives_match_finite_differences(basis):
    z = np.array([-3.3, -0.02, 0.013, 0.4, 5.1])
    h = 1e-6
    d1 = basis.design_matrix(z, 1)
    fd = (basis.design_matrix(z + h) - basis.design_matrix(z - h)) / (2 * h)
    assert np.allclose(d1, fd, rtol=1e-5, atol=1e-7)
    d2 = basis.design_matrix(z, 2)
    fd2 = (
        basis.design_matrix(z + h) - 2 * basis.design_matrix(z) + basis.design_matrix(z - h)
    ) / h**2
    assert np.allclose(d2, fd2, rtol=1e-3, atol=1e-3)


def test_coefficient_spline_consistency(basis):
    rng = np.random.default_rng(4)
    c = rng.standard_normal((basis.n_funcs, 2))
    z = rng.uniform(-7, 7, size=17)
    direct = basis.design_matrix(z) @ c
    via_spline = basis.coefficient_spline(c)(z)
    assert np.allclose(direct, via_spline, atol=1e-12)


def test_particle_in_a_box_convergence():
    # V = 0 with vanishing ends: lowest eigenvalue -> pi^2 / (2 L_box^2);
    # sextic-order splines reach rounding level already at a handful of
    # elements, so every refinement level must sit at the exact value
    exact = np.pi**2 / (2 * 16.0**2)
    for n_el in (6, 12):
        b = SplineBasis(graded_breakpoints(8.0, n_el, ratio=1.2), order=6)
        w = eigh(b.kinetic(), b.overlap(), subset_by_index=(0, 0))[0][0]
        assert abs(w - exact) < 1e-10 * exact


def test_outside_domain_evaluates_to_zero(basis):
    vals = basis.design_matrix(np.array([-9.0, 9.0, 100.0]))
    assert np.all(vals == 0.0)

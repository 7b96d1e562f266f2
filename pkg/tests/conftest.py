import numpy as np
import pytest

from magqmc.config import parse_config_text
from magqmc.hf import scf
from magqmc.kernels import build_kernel_table
from magqmc.pipeline import guiding_for, kernel_grid_for

HE_BETA = 1.0e8 / 4.701e5  # table field strength


@pytest.fixture(scope="session")
def he_cfg():
    return parse_config_text(
        """
        z = 2
        n_electrons = 2
        b_tesla = 1.0e8
        n_walkers = 500
        dtau = 1e-4
        schedule = vqmc:100x200:20 fpdqmc:300x200:60 rpdqmc:300x200:60
        seed = 20260810
        """
    )


@pytest.fixture(scope="session")
def he_kernels(he_cfg):
    return build_kernel_table(
        he_cfg.field.beta, he_cfg.field.gamma, 2.0, [0, 1], kernel_grid_for(he_cfg)
    )


@pytest.fixture(scope="session")
def he_orbitals(he_cfg, he_kernels):
    return scf(he_cfg, he_kernels)


@pytest.fixture(scope="session")
def he_guiding(he_cfg, he_orbitals):
    return guiding_for(he_cfg, he_orbitals)


@pytest.fixture(scope="session")
def hydrogen_cfg():
    return parse_config_text("z = 1\nbeta = 212.7207\nseed = 3\n")


@pytest.fixture(scope="session")
def hydrogen_kernels(hydrogen_cfg):
    return build_kernel_table(
        hydrogen_cfg.field.beta,
        hydrogen_cfg.field.gamma,
        1.0,
        [0],
        kernel_grid_for(hydrogen_cfg),
    )


def fd_gradient(func, x, h=1e-6):
    """Central-difference gradient of a scalar function of an array."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        grad[idx] = (func(xp) - func(xm)) / (2 * h)
    return grad


def fd_laplacian(func, x, h=1e-5):
    """Sum of second central differences over all coordinates."""
    x = np.asarray(x, dtype=float)
    f0 = func(x)
    total = 0.0
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        total += (func(xp) - 2 * f0 + func(xm)) / h**2
    return total

import numpy as np
import pytest

from phonon_cat.hilbert import HilbertConfig
from phonon_cat.model import TWO_PI, SystemParams


@pytest.fixture
def cfg8():
    return HilbertConfig(8, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def point_b():
    """Point-B rotating-frame parameters (rad/s) without the drive."""
    from phonon_cat.model import DeviceParams, system_from_device

    dev = DeviceParams(z_zpf=200e-15, omega_m=TWO_PI * 1.8e6, Q=4.2e8, T=0.01,
                       gamma_z=TWO_PI * 10.0, G2=9e15)
    return system_from_device(dev)


def random_density(cfg, rng, rank=3):
    from phonon_cat.hilbert import DensityOperator

    m = rng.normal(size=(cfg.dim, rank)) + 1j * rng.normal(size=(cfg.dim, rank))
    r = m @ m.conj().T
    return DensityOperator(r / np.trace(r), cfg)


def small_params(**kw):
    base = dict(g2=TWO_PI * 1.0, Omega=TWO_PI * 0.5, gamma_m=TWO_PI * 0.2, n_th=1.5, gamma_z=TWO_PI * 0.5)
    base.update(kw)
    return SystemParams(**base)

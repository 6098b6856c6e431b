import functools

import numpy as np
import pytest

from rescoh.decomposition import SpectralSystem
from rescoh.spectral import FrequencyGrid
from rescoh.timeseries import simulate_system


@functools.lru_cache(maxsize=None)
def sim(seed, noise_sd=1.0):
    """Cached (x1, x2, y) of the simulation model."""
    return simulate_system(seed, noise_sd=noise_sd)


def random_hpd(rng, p, cond=50.0):
    """Random Hermitian positive-definite p x p matrix."""
    a = rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p))
    q, _ = np.linalg.qr(a)
    ev = np.exp(rng.uniform(0, np.log(cond), p))
    return (q * ev) @ q.conj().T


def random_system(rng, k, half_count=4):
    """System whose joint (inputs + output) matrix is a random HPD at every grid point.

    The joint matrix is made Hermitian in frequency too (f(-l) = conj f(l)).
    """
    grid = FrequencyGrid(half_count)
    g = grid.count
    f = np.empty((k + 1, k + 1, g), dtype=complex)
    for i in range(half_count, g):
        f[:, :, i] = random_hpd(rng, k + 1)
    for i in range(half_count):
        f[:, :, i] = np.conj(f[:, :, grid.mirror(i)])
    f[:, :, half_count] = f[:, :, half_count].real
    return SpectralSystem.from_spectra(f, grid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

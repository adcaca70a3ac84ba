import numpy as np
import pytest

from pscvqkd import postselection
from pscvqkd.gaussian import epr_cm, symplectic_beamsplitter, symplectic_squeezer

BACKENDS = ["python"] + (["cython"] if postselection._compiled is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def random_symplectic(rng, n_modes, n_gates=6):
    """Random composition of squeezers and beamsplitters."""
    m = np.eye(2 * n_modes)
    for _ in range(n_gates):
        if n_modes > 1 and rng.random() < 0.5:
            i, j = rng.choice(n_modes, size=2, replace=False)
            g = symplectic_beamsplitter(rng.uniform(0, 1), int(i), int(j), n_modes)
        else:
            g = symplectic_squeezer(rng.normal(0, 0.7), int(rng.integers(n_modes)), n_modes)
        m = g @ m
    return m


def random_physical_two_mode(rng):
    """Thermal product state pushed through a random two-mode symplectic map."""
    nu = 1.0 + rng.exponential(2.0, size=2)
    gamma = np.diag([nu[0], nu[0], nu[1], nu[1]])
    m = random_symplectic(rng, 2)
    return m @ gamma @ m.T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

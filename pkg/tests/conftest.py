import numpy as np
import pytest

from cvqkd import gaussian


@pytest.fixture
def rng():
    return np.random.default_rng(20150901)


def random_symplectic(rng, total_modes, layers=4):
    """Random network of squeezers and beamsplitters as one symplectic matrix."""
    s = np.eye(2 * total_modes)
    for _ in range(layers):
        mode = int(rng.integers(total_modes))
        xi = float(rng.uniform(-0.8, 0.8))
        s = gaussian.squeeze_matrix(total_modes, mode, xi) @ s
        if total_modes > 1:
            a, b = rng.choice(total_modes, size=2, replace=False)
            t = float(rng.uniform(0.05, 0.95))
            s = gaussian.beamsplitter_matrix(total_modes, int(a), int(b), t) @ s
    return s


def random_physical_state(rng, total_modes, pure=False, layers=4):
    """Random Gaussian state: thermal (or vacuum) input through a random network."""
    if pure:
        g = np.eye(2 * total_modes)
    else:
        temps = rng.uniform(1.0, 4.0, size=total_modes)
        g = np.diag(np.repeat(temps, 2))
    s = random_symplectic(rng, total_modes, layers=layers)
    return gaussian.apply_symplectic(g, s)

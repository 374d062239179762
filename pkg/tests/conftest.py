import numpy as np
import pytest


def random_stable(rng, n, margin=1.0):
    """Random dense matrix shifted so its spectral abscissa is ``-margin``."""
    A = rng.standard_normal((n, n))
    return A - (np.linalg.eigvals(A).real.max() + margin) * np.eye(n)


def random_antistable(rng, n, margin=1.0):
    A = rng.standard_normal((n, n))
    return A - (np.linalg.eigvals(A).real.min() - margin) * np.eye(n)


def normal_stable(rng, n, low=0.5, high=5.0):
    """Orthogonal similarity of a stable diagonal matrix."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(-rng.uniform(low, high, n)) @ Q.T


def random_cplus(rng, size, real_fraction=0.0):
    mus = rng.uniform(0.1, 3.0, size) + 1j * rng.uniform(-3.0, 3.0, size)
    real = rng.random(size) < real_fraction
    mus[real] = mus[real].real
    return mus


def rel(a, b):
    """Relative Frobenius distance ``||a - b|| / ||b||``."""
    nb = np.linalg.norm(b)
    return np.linalg.norm(a - b) / (nb if nb > 0 else 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

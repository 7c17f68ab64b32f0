import numpy as np
import pytest

from vortexlp.model import VortexState


def random_valid_state(rng, n, r_max=0.85, min_sep=0.08):
    """Rejection-sample positions inside the disc with pairwise separation."""
    for _ in range(1000):
        r = r_max * np.sqrt(rng.uniform(0.01, 1.0, size=n))
        phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
        z = r * np.exp(1j * phi)
        ok = True
        for i in range(n):
            for j in range(i + 1, n):
                if abs(z[i] - z[j]) < min_sep:
                    ok = False
        if ok:
            return VortexState(z)
    raise RuntimeError("could not sample a valid state")


def random_charges(rng, n, same_sign=False):
    if same_sign:
        return np.full(n, int(rng.choice([1, 2])))
    charges = rng.choice([-2, -1, 1, 2], size=n)
    return charges


def random_quadratic(rng, dim):
    """Quadratic scalar field with its analytic gradient."""
    A = rng.normal(size=(dim, dim))
    A = 0.5 * (A + A.T)
    b = rng.normal(size=dim)

    def value(y):
        return 0.5 * float(y @ A @ y) + float(b @ y)

    def gradient(y):
        return A @ y + b

    return value, gradient


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)

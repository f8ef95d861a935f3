import numpy as np
import pytest


def planted_matrix(rng, moduli, max_cond=3.0):
    """Real matrix with a well-conditioned eigenbasis and planted eigenvalue moduli.

    Some neighbouring pairs become a rotation block (a complex pair sharing
    the first modulus); the planted moduli are returned with the matrix.
    """
    moduli = list(moduli)
    d = len(moduli)
    blocks = np.zeros((d, d))
    i = 0
    while i < d:
        r = moduli[i]
        if i + 1 < d and rng.random() < 0.4:
            th = rng.uniform(0.2, 3.0)
            blocks[i:i + 2, i:i + 2] = r * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
            moduli[i + 1] = r
            i += 2
        else:
            blocks[i, i] = r * rng.choice([-1.0, 1.0])
            i += 1
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    s = q @ np.diag(rng.uniform(1.0, max_cond, size=d))
    return s @ blocks @ np.linalg.inv(s), moduli


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

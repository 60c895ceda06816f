import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shuffle_spectra import build_kernel


@pytest.fixture(scope="session")
def kernel100():
    return build_kernel(100)


@pytest.fixture(scope="session")
def kernel200():
    return build_kernel(200)


@pytest.fixture(scope="session")
def dense_s100(kernel100):
    return 0.5 * (kernel100.probs + kernel100.probs.T)


def make_symmetric(n, eigenvalues, seed):
    """Symmetric matrix with a prescribed spectrum (dense-oracle helper)."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * np.asarray(eigenvalues)) @ q.T

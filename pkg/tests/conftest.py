import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def fd_grad(f, x, eps=1e-6):
    """Dense central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        xp = x.copy()
        xp[i] += eps
        xm = x.copy()
        xm[i] -= eps
        g[i] = (f(xp) - f(xm)) / (2 * eps)
    return g


def rel_err(a, b, floor=1e-8):
    """Max elementwise relative error of a against reference b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor)))


def rel_err_scaled(a, b):
    """Relative error with a floor tied to the largest reference entry,
    so tiny mixed-scale components are judged against FD noise, not zero."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    den = np.maximum(np.abs(b), 1e-3 * np.abs(b).max() + 1e-9)
    return float(np.max(np.abs(a - b) / den))

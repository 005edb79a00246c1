"""Shared fixtures: grids, random fields, and cached ground-profile solves."""

import numpy as np
import pytest

import fracsp as f

S, P = 0.9, 2.5


@pytest.fixture(scope="session")
def grid16():
    return f.make_grid(16, 8.0)


@pytest.fixture(scope="session")
def grid32():
    return f.make_grid(32, 12.0)


@pytest.fixture(scope="session")
def q32(grid32):
    """Reference profile at test scale (n=32, L=12)."""
    return f.solve_Q(grid32, S, P, residual_tol=1e-8)


@pytest.fixture(scope="session")
def q3216():
    """Wide-box profile for dilute-minimizer checks (n=32, L=16)."""
    return f.solve_Q(f.make_grid(32, 16.0), S, P, residual_tol=1e-8)


@pytest.fixture(scope="session")
def kernel16(grid16):
    return f.get_kernel(grid16, S)


@pytest.fixture(scope="session")
def kernel32(grid32):
    return f.get_kernel(grid32, S)


def smooth_random_field(grid, rng, decay=1.0):
    """Band-limited random field with O(1) amplitude."""
    import scipy.fft as sfft

    spec = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    vals = np.real(sfft.ifftn(spec * np.exp(-decay * grid.k_sq())))
    return f.Field(grid, vals / np.max(np.abs(vals)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

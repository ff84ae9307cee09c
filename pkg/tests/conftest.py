import numpy as np
import pytest

from refgame.world import WorldConfig, generate_world


def fd_grad(f, arr: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar f over every entry of arr (in place)."""
    out = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + eps
        hi = f()
        arr[idx] = orig - eps
        lo = f()
        arr[idx] = orig
        out[idx] = (hi - lo) / (2 * eps)
        it.iternext()
    return out


def assert_close(analytic: np.ndarray, numeric: np.ndarray, rtol: float = 1e-4, atol: float = 1e-7):
    np.testing.assert_allclose(analytic, numeric, rtol=rtol, atol=atol)


@pytest.fixture(scope="session")
def tiny_world():
    """2 categories x 2 concepts x 3 instances, 8-dim features."""
    return generate_world(
        WorldConfig(
            n_categories=2,
            concepts_per_category=2,
            instances_per_concept=3,
            feature_dim=8,
            seed=7,
        )
    )


@pytest.fixture(scope="session")
def desk_world():
    """The default desk-scale world (10 x 10 x 20, 64-dim)."""
    return generate_world(WorldConfig(seed=11))

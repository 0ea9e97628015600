import numpy as np
import pytest

from hashmarket import MarketParams, MinerProfile

LAMBDA = 1.0 / 600.0


def make_params(n=2, R=1e4, r=0.0, z=0.0, c=1e-3, p_max=100.0, T=1.0, lam=LAMBDA):
    return MarketParams(R=R, r=r, lambda_=lam, z=z, c=c, p_max=p_max, n=n, T=T)


def make_profiles(ts, x_min=1e-2, x_max=1e9):
    return tuple(MinerProfile(i, int(t), x_min, x_max) for i, t in enumerate(ts))


def random_interior_instance(rng, n_max=20, x_min=1e-2, x_max=1e12):
    """A random instance whose unclipped closed-form demands are interior.

    Returns (profiles, params, prices). Rejection-samples until the
    positivity condition holds and the fixed point clears the bounds.
    """
    while True:
        n = int(rng.integers(2, n_max + 1))
        ts = rng.integers(1, 501, n)
        params = make_params(n=n, r=20.0, z=5e-3)
        a = (params.R + params.r * ts) * np.exp(-params.lambda_ * params.z * ts)
        base = np.exp(rng.uniform(np.log(1.0), np.log(100.0)))
        prices = np.minimum(base * rng.uniform(0.7, 1.3, n), 100.0)
        w = prices / a
        total = (n - 1) / w.sum()
        raw = total - total**2 * w
        if np.all((n - 1) * w < w.sum()) and np.all(raw > x_min) and np.all(raw < x_max):
            return make_profiles(ts, x_min, x_max), params, prices


@pytest.fixture
def rng():
    return np.random.default_rng(20250810)

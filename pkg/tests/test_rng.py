import numpy as np

from dynident.rng import Xoshiro256pp


def test_same_seed_same_stream():
    a = Xoshiro256pp(12345).uniform(64)
    b = Xoshiro256pp(12345).uniform(64)
    assert np.array_equal(a, b)


def test_different_seeds_differ():
    a = Xoshiro256pp(1).uniform(64)
    b = Xoshiro256pp(2).uniform(64)
    assert not np.array_equal(a, b)


def test_uniform_open_interval():
    u = Xoshiro256pp(7).uniform(10_000)
    assert np.all(u > 0.0) and np.all(u < 1.0)
    assert abs(u.mean() - 0.5) < 0.02


def test_normal_moments():
    z = Xoshiro256pp(11).standard_normal(50_000)
    assert abs(z.mean()) < 0.02
    assert abs(z.std() - 1.0) < 0.02


def test_laplace_moments():
    b = 1.0 / np.sqrt(2.0)
    x = Xoshiro256pp(13).standard_laplace(50_000, b=b)
    # variance 2 b^2 = 1 for this scale
    assert abs(x.mean()) < 0.02
    assert abs(x.var() - 1.0) < 0.05

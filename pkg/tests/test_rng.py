import numpy as np

from mpirecon.rng import SeededGenerator, normal_pair


def test_same_seed_same_stream():
    a = normal_pair(SeededGenerator(42))
    b = normal_pair(SeededGenerator(42))
    assert a == b


def test_different_seeds_differ():
    assert normal_pair(SeededGenerator(1)) != normal_pair(SeededGenerator(2))


def test_scalar_and_batch_paths_agree():
    gen = SeededGenerator(9)
    p1 = normal_pair(gen)
    p2 = normal_pair(gen)
    batch = SeededGenerator(9).normal_pairs(2)
    assert p1 == (batch[0, 0], batch[0, 1])
    assert p2 == (batch[1, 0], batch[1, 1])


def test_normal_moments():
    n = 1_000_000
    draws = SeededGenerator(123).normal_pairs(n // 2).ravel()
    assert abs(draws.mean()) < 4.0 / np.sqrt(n)
    assert abs(draws.var() - 1.0) < 0.01


def test_uniforms_in_unit_interval():
    u = SeededGenerator(5).uniforms(10000)
    assert np.all(u >= 0.0) and np.all(u < 1.0)
    assert abs(u.mean() - 0.5) < 0.02

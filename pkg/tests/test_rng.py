import numpy as np

from snnconvert import Rng


def test_same_seed_same_sequence():
    assert np.array_equal(Rng(42).random(100), Rng(42).random(100))
    assert not np.array_equal(Rng(42).random(100), Rng(43).random(100))


def test_draws_independent_of_call_granularity():
    whole = Rng(7).random(10)
    rng = Rng(7)
    parts = np.concatenate([rng.random(3), rng.random(7)])
    assert np.array_equal(whole, parts)


def test_frozen_reference_values():
    # first two uniform draws of seed 0; pinned so any stream change is loud
    u = Rng(0).random(2)
    assert u[0] == 0.8833108082136426
    assert u[1] == 0.43152799704850997


def test_uniform_range_and_mean():
    u = Rng(1).random(20000)
    assert np.all((u >= 0.0) & (u < 1.0))
    assert abs(u.mean() - 0.5) < 0.01


def test_normal_moments():
    z = Rng(2).normal(20000)
    assert abs(z.mean()) < 0.03
    assert abs(z.std() - 1.0) < 0.03


def test_truncated_normal_bounds():
    x = Rng(3).truncated_normal(0.5, 0.4, 0.0, 1.0, 5000)
    assert np.all((x >= 0.0) & (x <= 1.0))
    assert abs(x.mean() - 0.5) < 0.05


def test_permutation_is_a_permutation():
    p = Rng(4).permutation(100)
    assert np.array_equal(np.sort(p), np.arange(100))
    assert np.array_equal(p, Rng(4).permutation(100))


def test_derive_streams_differ():
    base = Rng(5)
    a = base.derive(1).random(10)
    b = base.derive(2).random(10)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, Rng(5).derive(1).random(10))

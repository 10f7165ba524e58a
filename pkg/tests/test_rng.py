import numpy as np
import pytest

from ancsim.rng import derive_stream, wiener_increments

# locked after the first verified run; guards the draw pipeline
# (Philox raw words -> open-interval uniforms -> inverse normal CDF)
GOLDEN_SEED42_RUN7 = [-2.184330029312191, -1.451207069964386, -1.5845218988491114]


def test_same_seed_and_index_is_deterministic():
    a = derive_stream(42, 0).normal(100)
    b = derive_stream(42, 0).normal(100)
    assert np.array_equal(a, b)


def test_distinct_run_indices_give_distinct_draws():
    a = derive_stream(42, 0).normal(100)
    b = derive_stream(42, 1).normal(100)
    assert not np.array_equal(a, b)


def test_golden_first_draws():
    v = derive_stream(42, 7).normal(3)
    assert np.allclose(v, GOLDEN_SEED42_RUN7, rtol=0, atol=1e-15)


def test_uniform_is_strictly_inside_unit_interval():
    u = derive_stream(1, 0).uniform(10_000)
    assert np.all(u > 0.0) and np.all(u < 1.0)


def test_wiener_rejects_bad_arguments():
    stream = derive_stream(0, 0)
    with pytest.raises(ValueError):
        wiener_increments(stream, 1, 10, 0.0)
    with pytest.raises(ValueError):
        wiener_increments(stream, 0, 10, 1e-3)


def test_wiener_variance_matches_dt():
    dt = 1e-3
    path = wiener_increments(derive_stream(3, 0), 1, 200_000, dt)
    var = np.var(path.increments)
    assert 0.95 * dt < var < 1.05 * dt


def test_wiener_coordinates_uncorrelated():
    path = wiener_increments(derive_stream(4, 0), 2, 200_000, 1e-3)
    corr = np.corrcoef(path.increments.T)[0, 1]
    assert abs(corr) < 0.01


def test_wiener_mean_within_five_sigma():
    dt = 1e-3
    count = 200_000
    path = wiener_increments(derive_stream(5, 0), 1, count, dt)
    assert abs(np.mean(path.increments)) < 5 * np.sqrt(dt / count)


def test_increment_shape_and_grid():
    path = wiener_increments(derive_stream(6, 0), 3, 500, 0.01)
    assert path.increments.shape == (500, 3)
    assert path.dim == 3 and path.dt == 0.01

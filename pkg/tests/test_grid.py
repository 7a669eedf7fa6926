import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from assure import grid
from assure.grid import (
    DiffusionParams,
    Displacement,
    GridDistribution,
    MatchKernel,
    VanishedBelief,
)

from oracles import forecast_matrix, fuse_match_loops

ZERO = Displacement(0, 0)
NO_LEAK = DiffusionParams(0.0)


def rand_dist(rng, w, h, sparsity=0.0):
    d = rng.random((h, w))
    if sparsity:
        d[rng.random((h, w)) < sparsity] = 0.0
        if d.sum() == 0:
            d[0, 0] = 1.0
    return GridDistribution(d / d.sum())


def rand_kernel(rng, w, h):
    k = rng.random((h, w, h, w)) ** 3
    return MatchKernel(k / k.sum(axis=(2, 3), keepdims=True))


def assert_closed(d: GridDistribution):
    assert np.all(d.density >= 0)
    assert abs(d.density.sum() - 1.0) <= 1e-9


# -- types ---------------------------------------------------------------------------

def test_grid_distribution_rejects_bad_input():
    with pytest.raises(ValueError):
        GridDistribution(np.full((2, 2), 0.3))
    with pytest.raises(ValueError):
        GridDistribution([[1.5, -0.5]])
    with pytest.raises(ValueError):
        GridDistribution([1.0])


def test_grid_distribution_is_read_only():
    d = GridDistribution.uniform(3, 2)
    with pytest.raises(ValueError):
        d.density[0, 0] = 1.0
    assert d.shape == (2, 3) and d.width == 3 and d.height == 2


def test_displacement_and_diffusion_validation():
    with pytest.raises(ValueError):
        Displacement(float("inf"), 0)
    with pytest.raises(ValueError):
        DiffusionParams(1.5)
    assert Displacement(1, 2) + Displacement(0.5, -1) == Displacement(1.5, 1.0)


def test_kernel_row_error_names_cell():
    k = np.array(MatchKernel.identity(3, 2).weights)
    k[1, 2, 0, 0] = 0.5
    with pytest.raises(ValueError, match=r"\(2, 1\)"):
        MatchKernel(k)


# -- normalize -------------------------------------------------------------------------

def test_normalize_constant_grid_is_uniform():
    d = grid.normalize(np.full((4, 4), 2.0))
    assert np.allclose(d.density, 1 / 16)


def test_normalize_single_cell_is_delta():
    raw = np.zeros((3, 5))
    raw[2, 4] = 0.3
    assert grid.normalize(raw).density[2, 4] == 1.0


def test_normalize_all_zero_vanishes():
    with pytest.raises(VanishedBelief, match="vanished belief"):
        grid.normalize(np.zeros((3, 3)))


# -- fuse_match ------------------------------------------------------------------------

def test_fuse_match_identity_kernel_delta_observation():
    prior = GridDistribution.uniform(4, 3)
    obs = GridDistribution.delta(4, 3, (2, 1))
    post = grid.fuse_match(prior, obs, MatchKernel.identity(4, 3))
    assert post.density[1, 2] == 1.0


def test_fuse_match_uniform_kernel_returns_prior():
    rng = np.random.default_rng(0)
    prior = rand_dist(rng, 5, 4)
    obs = rand_dist(rng, 5, 4)
    post = grid.fuse_match(prior, obs, MatchKernel.uniform(5, 4))
    assert np.allclose(post.density, prior.density, atol=1e-12, rtol=0)


def test_fuse_match_three_by_three_against_loops():
    k = np.full((3, 3, 3, 3), 0.3 / 8)
    for y in range(3):
        for x in range(3):
            k[y, x, y, x] = 0.7
    prior = GridDistribution.uniform(3, 3)
    obs = GridDistribution.delta(3, 3, (1, 1))
    post = grid.fuse_match(prior, obs, MatchKernel(k))
    expected = fuse_match_loops(prior.density, obs.density, k)
    assert np.allclose(post.density, expected, atol=1e-12, rtol=0)
    # centre weighted 0.7 against 0.3/8 for each other cell
    assert post[1, 1] == pytest.approx(0.7 / (0.7 + 0.3), abs=1e-12)


def test_fuse_match_random_against_loops():
    rng = np.random.default_rng(1)
    for _ in range(5):
        prior, obs = rand_dist(rng, 4, 3), rand_dist(rng, 4, 3)
        k = rand_kernel(rng, 4, 3)
        expected = fuse_match_loops(prior.density, obs.density, k.weights)
        assert np.allclose(grid.fuse_match(prior, obs, k).density, expected,
                           atol=1e-12, rtol=0)


def test_fuse_match_dimension_mismatch():
    with pytest.raises(ValueError):
        grid.fuse_match(GridDistribution.uniform(3, 3), GridDistribution.uniform(3, 4),
                        MatchKernel.uniform(3, 3))
    with pytest.raises(ValueError):
        grid.fuse_match(GridDistribution.uniform(3, 3), GridDistribution.uniform(3, 3),
                        MatchKernel.uniform(2, 2))


def test_fuse_match_contradiction_vanishes():
    prior = GridDistribution.delta(3, 3, (0, 0))
    obs = GridDistribution.delta(3, 3, (2, 2))
    with pytest.raises(VanishedBelief):
        grid.fuse_match(prior, obs, MatchKernel.identity(3, 3))


# -- estimate_kernel ------------------------------------------------------------------

def test_estimate_kernel_delta_matcher_is_identity():
    k = grid.estimate_kernel(lambda c: GridDistribution.delta(4, 3, c), 4, 3)
    assert np.array_equal(k.weights, MatchKernel.identity(4, 3).weights)


def test_estimate_kernel_uniform_matcher():
    k = grid.estimate_kernel(lambda c: GridDistribution.uniform(4, 3), 4, 3)
    assert np.allclose(k.weights, 1 / 12)


def test_estimate_kernel_invalid_output_names_cell():
    def matcher(cell):
        if cell == (2, 1):
            return np.full((3, 4), 0.5)
        return GridDistribution.uniform(4, 3).density

    with pytest.raises(ValueError, match=r"\(2, 1\)"):
        grid.estimate_kernel(matcher, 4, 3)


# -- fuse_gps ----------------------------------------------------------------------------

def test_fuse_gps_certain_reading_is_delta():
    rng = np.random.default_rng(2)
    post = grid.fuse_gps(rand_dist(rng, 6, 5), (3, 2), 1.0)
    assert post.density[2, 3] == 1.0


def test_fuse_gps_interior_uniform_prior():
    post = grid.fuse_gps(GridDistribution.uniform(20, 24), (10, 10), 0.92)
    assert post[10, 10] == pytest.approx(0.92, abs=1e-12)
    for dx, dy in grid.NEIGHBOURS:
        assert post[10 + dx, 10 + dy] == pytest.approx(0.01, abs=1e-12)


def test_fuse_gps_corner_renormalizes_over_four_cells():
    post = grid.fuse_gps(GridDistribution.uniform(20, 24), (0, 0), 0.92)
    assert post[0, 0] == pytest.approx(0.92 / 0.95, abs=1e-12)
    for cell in [(1, 0), (0, 1), (1, 1)]:
        assert post[cell] == pytest.approx(0.01 / 0.95, abs=1e-12)
    assert np.count_nonzero(post.density) == 4


def test_fuse_gps_errors():
    prior = GridDistribution.delta(6, 6, (5, 5))
    with pytest.raises(VanishedBelief):
        grid.fuse_gps(prior, (0, 0), 0.92)
    with pytest.raises(ValueError):
        grid.fuse_gps(prior, (6, 0), 0.92)
    with pytest.raises(ValueError):
        grid.fuse_gps(prior, (5, 5), 0.0)


# -- propagate -----------------------------------------------------------------------------

def test_propagate_identity():
    rng = np.random.default_rng(3)
    b = rand_dist(rng, 5, 5)
    assert np.array_equal(grid.propagate(b, ZERO, NO_LEAK).density, b.density)


def test_propagate_integer_move():
    b = GridDistribution.delta(6, 6, (2, 2))
    assert grid.propagate(b, Displacement(1, 0), NO_LEAK)[3, 2] == 1.0


def test_propagate_half_cell_splits_mass():
    out = grid.propagate(GridDistribution.delta(6, 6, (2, 2)), Displacement(0.5, 0), NO_LEAK)
    assert out[2, 2] == pytest.approx(0.5) and out[3, 2] == pytest.approx(0.5)
    assert np.count_nonzero(out.density) == 2


def test_propagate_clamps_at_border():
    out = grid.propagate(GridDistribution.delta(4, 4, (3, 0)), Displacement(2.5, -1.0),
                         NO_LEAK)
    assert out[3, 0] == pytest.approx(1.0)


def test_propagate_leak_spreads_to_in_bounds_neighbours():
    out = grid.propagate(GridDistribution.delta(4, 4, (0, 0)), ZERO, DiffusionParams(0.3))
    assert out[0, 0] == pytest.approx(0.7)
    for cell in [(1, 0), (0, 1), (1, 1)]:
        assert out[cell] == pytest.approx(0.1)


# -- forecast ---------------------------------------------------------------------------

def test_forecast_horizon_one_is_belief():
    b = GridDistribution.uniform(3, 3)
    fc = grid.forecast(b, [ZERO], [ZERO], NO_LEAK, 1)
    assert fc.horizon == 1 and fc[0] is b


def test_forecast_zero_plan_is_constant():
    rng = np.random.default_rng(4)
    b = rand_dist(rng, 4, 4)
    fc = grid.forecast(b, [ZERO] * 5, [ZERO] * 5, NO_LEAK, 5)
    assert all(np.array_equal(f.density, b.density) for f in fc)


def test_forecast_errors():
    b = GridDistribution.uniform(3, 3)
    with pytest.raises(ValueError):
        grid.forecast(b, [ZERO], [ZERO], NO_LEAK, 0)
    with pytest.raises(ValueError):
        grid.forecast(b, [ZERO], [ZERO] * 3, NO_LEAK, 3)


def test_forecast_constant_plan_matches_transition_matrix():
    rng = np.random.default_rng(5)
    b = rand_dist(rng, 6, 6)
    leak = DiffusionParams(0.2)
    plan = [Displacement(1, 0)] * 4
    fc = grid.forecast(b, plan, [ZERO] * 4, leak, 4)
    expected = forecast_matrix(b.density, [(1, 0)] * 4, 0.2, 4)
    for f, e in zip(fc, expected):
        assert np.allclose(f.density, e, atol=1e-10, rtol=0)


moves = st.tuples(st.floats(-2.5, 2.5), st.floats(-2.5, 2.5))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 5),
       st.lists(moves, min_size=5, max_size=5), st.lists(moves, min_size=5, max_size=5),
       st.floats(0, 1), st.integers(0, 2 ** 32))
def test_forecast_matches_oracle_property(w, h, horizon, plan, perturb, leak, seed):
    b = rand_dist(np.random.default_rng(seed), w, h, sparsity=0.5)
    fc = grid.forecast(b, [Displacement(*m) for m in plan],
                       [Displacement(*m) for m in perturb], DiffusionParams(leak), horizon)
    total = [(a[0] + p[0], a[1] + p[1]) for a, p in zip(plan, perturb)]
    for f, e in zip(fc, forecast_matrix(b.density, total, leak, horizon)):
        assert np.allclose(f.density, e, atol=1e-10, rtol=0)


# -- violation probability ------------------------------------------------------------------

def test_violation_probability_zero_on_unreached_mask():
    b = GridDistribution.delta(5, 5, (0, 0))
    fc = grid.forecast(b, [ZERO] * 3, [ZERO] * 3, NO_LEAK, 3)
    mask = np.zeros((5, 5), bool)
    mask[4, 4] = True
    assert grid.violation_probability(fc, mask) == 0.0
    assert grid.violation_probability(fc, np.zeros((5, 5), bool)) == 0.0


def test_violation_probability_delta_lands_on_mask():
    b = GridDistribution.delta(5, 5, (0, 2))
    fc = grid.forecast(b, [Displacement(1, 0)] * 4, [ZERO] * 4, NO_LEAK, 4)
    mask = np.zeros((5, 5), bool)
    mask[2, 3] = True
    assert grid.violation_probability(fc, mask) == 1.0


def test_violation_probability_mask_shape_checked():
    fc = [GridDistribution.uniform(3, 3)]
    with pytest.raises(ValueError):
        grid.violation_probability(fc, np.zeros((2, 3), bool))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32), arrays(bool, (5, 6)), arrays(bool, (5, 6)))
def test_violation_probability_monotone_in_mask(seed, m1, m2):
    rng = np.random.default_rng(seed)
    b = rand_dist(rng, 6, 5)
    fc = grid.forecast(b, [Displacement(0.7, -0.3)] * 3, [ZERO] * 3, DiffusionParams(0.1), 3)
    assert grid.violation_probability(fc, m1 | m2) >= grid.violation_probability(fc, m1)


# -- summaries -------------------------------------------------------------------------------

def test_mean_location_examples():
    assert grid.mean_location(GridDistribution.delta(6, 6, (3, 4))) == (3.0, 4.0)
    assert grid.mean_location(GridDistribution.uniform(4, 4)) == pytest.approx((1.5, 1.5))
    d = np.zeros((1, 3))
    d[0, 0] = d[0, 2] = 0.5
    assert grid.mean_location(GridDistribution(d)) == pytest.approx((1.0, 0.0))


def test_argmax_location_examples():
    assert grid.argmax_location(GridDistribution.delta(6, 3, (5, 1))) == (5, 1)
    assert grid.argmax_location(GridDistribution.uniform(4, 4)) == (0, 0)
    d = np.full((5, 5), 0.2 / 23)
    d[1, 1] = d[3, 3] = 0.4
    assert grid.argmax_location(GridDistribution(d)) == (1, 1)
    # row-major: lowest y wins before lowest x
    d = np.zeros((3, 3))
    d[0, 2] = d[1, 0] = 0.5
    assert grid.argmax_location(GridDistribution(d)) == (2, 0)


@settings(max_examples=50, deadline=None)
# subnormal cells would underflow to zero under scaling
@given(arrays(float, (4, 5), elements=st.just(0.0) | st.floats(1e-6, 10)),
       st.floats(1e-3, 1e3))
def test_argmax_invariant_to_scaling(raw, c):
    if raw.sum() <= 0:
        raw[0, 0] = 1.0
    a = grid.argmax_location(grid.normalize(raw))
    assert grid.argmax_location(grid.normalize(raw * c)) == a


def test_entropy_bounds():
    assert grid.entropy(GridDistribution.delta(4, 4, (1, 1))) == 0.0
    assert grid.entropy(GridDistribution.uniform(4, 4)) == pytest.approx(np.log(16))


def test_pgm_header_and_scaling(tmp_path):
    d = np.zeros((2, 3))
    d[0, 0], d[1, 2] = 0.75, 0.25
    pgm = grid.to_pgm(GridDistribution(d))
    assert pgm.startswith(b"P5\n3 2\n255\n")
    assert list(pgm[-6:]) == [255, 0, 0, 0, 0, 85]
    grid.write_pgm(tmp_path / "b.pgm", GridDistribution(d))
    assert (tmp_path / "b.pgm").read_bytes() == pgm


# -- closure ------------------------------------------------------------------------------------

@settings(max_examples=80, deadline=None)
@given(st.integers(1, 7), st.integers(1, 7), st.integers(0, 2 ** 32), moves, st.floats(0, 1),
       st.floats(0.01, 1.0))
def test_closure_under_all_operations(w, h, seed, move, leak, p_gps):
    rng = np.random.default_rng(seed)
    prior = rand_dist(rng, w, h, sparsity=0.3)
    assert_closed(grid.fuse_match(prior, rand_dist(rng, w, h), rand_kernel(rng, w, h)))
    assert_closed(grid.propagate(prior, Displacement(*move), DiffusionParams(leak)))
    cell = tuple(int(v) for v in np.unravel_index(np.argmax(prior.density), prior.shape))[::-1]
    assert_closed(grid.fuse_gps(prior, cell, p_gps))

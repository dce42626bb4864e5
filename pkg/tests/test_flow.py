import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynlap.errors import NonFiniteState, RefinementExplosion
from dynlap.mesh import grid_points
from dynlap.flow import (FlowField, Polyline, TrajectoryEnsemble, advect_chains, advect_polyline,
                         double_gyre_field, generate_trajectories, gyre_switch, integrate,
                         integrate_many, polygon_area, polyline_length, rotation_field,
                         step_times, zero_field)

GAMMA = Polyline([[0.5, 0.0], [0.5, 1.0]])


def square_loop(x0, y0, side, n_per_side=50):
    s = np.linspace(0, side, n_per_side, endpoint=False)
    return np.vstack([
        np.column_stack([x0 + s, np.full_like(s, y0)]),
        np.column_stack([np.full_like(s, x0 + side), y0 + s]),
        np.column_stack([x0 + side - s, np.full_like(s, y0 + side)]),
        np.column_stack([np.full_like(s, x0), y0 + side - s]),
    ])


def test_switch_values():
    assert gyre_switch(0.0) == 0.0
    assert gyre_switch(1.0) == 1.0
    assert gyre_switch(0.5) == 0.5


def test_double_gyre_divergence_free():
    F = double_gyre_field()
    rng = np.random.default_rng(0)
    h = 1e-5
    for t, (x, y) in zip(rng.random(200), rng.random((200, 2))):
        du = F(t, [x + h, y])[0] - F(t, [x - h, y])[0]
        dv = F(t, [x, y + h])[1] - F(t, [x, y - h])[1]
        assert abs((du + dv) / (2 * h)) <= 1e-6


def test_double_gyre_matches_stream_function():
    # velocity = (-psi_y, psi_x), checked by differencing psi
    def psi(t, x, y):
        s = gyre_switch(t)
        return ((1 - s) * np.sin(2 * np.pi * x) * np.sin(np.pi * y)
                + s * np.sin(np.pi * x) * np.sin(2 * np.pi * y))

    F = double_gyre_field()
    h = 1e-6
    for t, x, y in [(0.0, 0.3, 0.4), (0.37, 0.81, 0.12), (1.0, 0.5, 0.5)]:
        u = -(psi(t, x, y + h) - psi(t, x, y - h)) / (2 * h)
        v = (psi(t, x + h, y) - psi(t, x - h, y)) / (2 * h)
        assert np.allclose(F(t, [x, y]), [u, v], atol=1e-7)


def test_zero_field_is_identity():
    assert np.array_equal(integrate(zero_field((0, 3)), (0.3, 0.7), 0, 3), [0.3, 0.7])


def test_rotation_orbit_closes():
    F = rotation_field()
    x = integrate(F, (0.8, 0.5), 0.0, 2 * math.pi, dt=1e-3)
    assert np.linalg.norm(x - [0.8, 0.5]) <= 1e-8


def test_backward_integration_inverts():
    F = double_gyre_field()
    x1 = integrate(F, (0.2, 0.3), 0.0, 1.0, 1e-3)
    assert np.allclose(integrate(F, x1, 1.0, 0.0, 1e-3), [0.2, 0.3], atol=1e-9)


def _change_ratio(F, x0, t1, steps):
    ends = [integrate(F, x0, 0.0, t1, h) for h in steps]
    return np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2])


def test_rk4_step_halving_example():
    ratio = _change_ratio(double_gyre_field(), (0.25, 0.25), 1.0, [1e-2, 5e-3, 2.5e-3])
    assert ratio <= 16


def test_rk4_fourth_order_global_error():
    # RMS endpoint change over a grid of seeds; single points can be noisy
    F = double_gyre_field()
    X = grid_points(12) * 0.9 + 0.05
    ends = [integrate_many(F, X, 0, 1, h) for h in (1e-2, 5e-3, 2.5e-3)]
    rms = [np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))) for a, b in zip(ends, ends[1:])]
    assert 12 <= rms[0] / rms[1] <= 20


def test_rk4_order_on_rotation():
    ratio = _change_ratio(rotation_field(), (0.9, 0.5), 3.0, [0.2, 0.1, 0.05])
    assert 12 <= ratio <= 20


def test_step_times_last_step_shortened():
    ts = step_times(0.0, 1.0, 0.3)
    assert np.allclose(ts, [0, 0.3, 0.6, 0.9, 1.0])
    assert step_times(1.0, 0.0, 0.5).tolist() == [1.0, 0.5, 0.0]


def test_span_checked():
    with pytest.raises(ValueError):
        integrate(double_gyre_field(), (0.5, 0.5), 0.0, 2.0)


def test_blowup_raises():
    F = FlowField(lambda t, X: np.where(np.abs(X) > 1e3, np.nan, X**2), (0, 10), "blowup")
    with pytest.raises(NonFiniteState):
        integrate(F, (1.0, 1.0), 0, 10, 0.1)


def test_cython_and_python_kernels_agree():
    pts = np.random.default_rng(1).random((50, 2))
    F = double_gyre_field()
    a = integrate_many(F, pts, 0, 1, 1e-2, backend="python")
    b = integrate_many(F, pts, 0, 1, 1e-2)
    assert np.allclose(a, b, rtol=0, atol=1e-13)


def test_generate_zero_field():
    seeds = np.random.default_rng(2).random((10, 2))
    ens = generate_trajectories(zero_field(), seeds, np.linspace(0, 1, 5))
    assert ens.present.all()
    for l in range(5):
        assert np.array_equal(ens.positions[:, l], seeds)


def test_generate_shape_contract():
    ens = generate_trajectories(double_gyre_field(), [[0.3, 0.3]], [0, 0.5, 1])
    assert ens.positions.shape == (1, 3, 2)
    assert ens.present.all()


def test_generate_marks_blowup_absent():
    F = FlowField(lambda t, X: np.where(np.abs(X) > 1e3, np.nan, X**2), (0, 10), "blowup")
    with pytest.warns(UserWarning, match="non-finite"):
        ens = generate_trajectories(F, [[2.0, 2.0], [0.0, 0.0]], [0, 1, 2])  # blows up at t=1/2
    assert ens.present.tolist() == [[True, False, False], [True, True, True]]


def test_volume_preservation_of_seed_square():
    # dense boundary of an interior 0.2 x 0.2 square, advected to t=1
    loop = square_loop(0.2, 0.3, 0.2, 200)
    ens = generate_trajectories(double_gyre_field(), loop, [0, 1])
    area = polygon_area(ens.positions[:, 1])
    assert area == pytest.approx(0.04, rel=0.02)


def test_volume_preservation_refined_polygon():
    closed = Polyline(square_loop(0.6, 0.1, 0.25, 20), closed=True)
    out = advect_polyline(double_gyre_field(), closed, 0, 1, 1e-2, max_seg=2e-3)
    assert abs(polygon_area(out.vertices) / 0.0625 - 1) <= 0.02


def test_trajectory_ensemble_validation():
    with pytest.raises(ValueError):
        TrajectoryEnsemble([0, 0], np.zeros((1, 2, 2)), np.ones((1, 2)))
    with pytest.raises(ValueError):
        TrajectoryEnsemble([0, 1], np.full((1, 2, 2), np.nan), np.ones((1, 2)))
    ens = TrajectoryEnsemble([0, 1], np.ones((1, 2, 2)), [[True, False]])
    assert np.isnan(ens.positions[0, 1]).all()


def test_polyline_lengths():
    assert polyline_length(GAMMA) == 1.0
    square = Polyline([[0, 0], [1, 0], [1, 1], [0, 1]], closed=True)
    assert polyline_length(square) == 4.0
    assert polyline_length(Polyline([[0, 0], [3, 4]])) == 5.0
    with pytest.raises(ValueError):
        Polyline([[0, 0]])
    with pytest.raises(ValueError):
        Polyline([[0, 0], [0, 0], [1, 1]])


def test_advect_zero_field_unchanged():
    curve = Polyline([[0.1, 0.1], [0.4, 0.9], [0.8, 0.2]])
    out = advect_polyline(zero_field(), curve, 0, 1, max_seg=10.0)
    assert np.array_equal(out.vertices, curve.vertices)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=2, max_size=6, unique=True))
def test_rotation_preserves_length(vertices):
    v = np.asarray(vertices)
    if np.any(np.linalg.norm(np.diff(v, axis=0), axis=1) < 1e-6):
        return
    curve = Polyline(v)
    out = advect_polyline(rotation_field(), curve, 0, math.pi, 1e-2, max_seg=0.05)
    assert polyline_length(out) == pytest.approx(polyline_length(curve), rel=1e-6)


def test_gamma_length_under_double_gyre():
    out = advect_polyline(double_gyre_field(), GAMMA, 0, 1, 1e-2, max_seg=1e-3)
    assert polyline_length(out) == pytest.approx(8.3057, rel=5e-3)
    assert np.max(np.linalg.norm(np.diff(out.vertices, axis=0), axis=1)) <= 1e-3


def test_refinement_is_monotone():
    F = double_gyre_field()
    lengths = [polyline_length(advect_polyline(F, GAMMA, 0, 1, 1e-2, max_seg=s))
               for s in (0.1, 0.03, 0.01, 0.003)]
    assert all(b >= a for a, b in zip(lengths, lengths[1:]))


def test_refinement_cap():
    with pytest.raises(RefinementExplosion):
        advect_polyline(double_gyre_field(), GAMMA, 0, 1, 1e-2, max_seg=1e-3, max_vertices=100)


def test_advect_chains_tracks_each_curve():
    curves = [np.array([[0.5, 0.0], [0.5, 1.0]]), np.array([[0.1, 0.1], [0.2, 0.1]])]
    lengths, _ = advect_chains(zero_field(), curves, [0, 0.5, 1])
    assert np.allclose(lengths, [[1.0, 0.1]] * 3)

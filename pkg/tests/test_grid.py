import numpy as np
import pytest

from bpgm import (
    Density,
    ball_mass,
    circle_grid,
    dirac_density,
    geodesic_dist,
    torus_grid,
    uniform_density,
)
from bpgm.grid import dist_to_point, nearest_index


def test_torus_grid_basic():
    g = torus_grid(1, 300)
    assert g.size == 300
    assert g.points.shape == (300, 1)
    assert g.spacing == pytest.approx(1.0 / 300)
    assert np.sum(g.weights) == pytest.approx(1.0)
    assert np.all(g.weights == g.weights[0])


def test_torus_grid_2d_size():
    g = torus_grid(2, 20)
    assert g.size == 400
    assert g.points.shape == (400, 2)
    assert np.sum(g.weights) == pytest.approx(1.0)


@pytest.mark.parametrize("dim", [0, 4])
def test_torus_grid_rejects_bad_dim(dim):
    with pytest.raises(ValueError):
        torus_grid(dim, 10)


def test_circle_grid_period():
    g = circle_grid(100)
    assert g.kind == "circle"
    assert g.period == pytest.approx(2.0 * np.pi)
    assert g.spacing == pytest.approx(2.0 * np.pi / 100)


def test_grid_arrays_read_only():
    g = torus_grid(1, 10)
    with pytest.raises(ValueError):
        g.points[0] = 0.5
    with pytest.raises(ValueError):
        g.weights[0] = 0.0


def test_geodesic_dist_wraps():
    g = torus_grid(1, 100)
    # 0.1 and 0.9 are 0.2 apart through the seam, not 0.8
    assert geodesic_dist(g, np.array([0.1]), np.array([0.9])) == pytest.approx(0.2)
    assert geodesic_dist(g, np.array([0.3]), np.array([0.3])) == 0.0
    assert g.diameter == pytest.approx(0.5)


def test_geodesic_dist_2d_is_euclidean_of_wraps():
    g = torus_grid(2, 10)
    a = np.array([0.1, 0.9])
    b = np.array([0.9, 0.1])
    # per-axis wrapped distances are both 0.2
    assert geodesic_dist(g, a, b) == pytest.approx(np.hypot(0.2, 0.2))


def test_circle_dist_is_arc_length():
    g = circle_grid(64)
    a, b = np.array([0.1]), np.array([2 * np.pi - 0.1])
    assert geodesic_dist(g, a, b) == pytest.approx(0.2)


def test_dist_to_point_matches_pairwise():
    g = torus_grid(1, 50)
    center = np.array([0.37])
    d = dist_to_point(g, center)
    for j in (0, 13, 49):
        assert d[j] == pytest.approx(geodesic_dist(g, g.points[j], center))


def test_nearest_index_wraps_around():
    g = torus_grid(1, 100)
    assert nearest_index(g, np.array([0.0])) == 0
    assert nearest_index(g, np.array([0.999])) == 0
    assert nearest_index(g, np.array([0.503])) == 50


def test_ball_mass_counts_closed_ball():
    g = torus_grid(1, 300)
    # radius 0.1 catches indices -30..30: 61 points of weight 1/300
    assert ball_mass(g, np.zeros(1), 0.1) == pytest.approx(61.0 / 300.0)


def test_ball_mass_empty_ball_raises():
    g = torus_grid(1, 10)
    with pytest.raises(ValueError):
        ball_mass(g, np.array([0.05]), 1e-6)


def test_uniform_density_mass_one():
    g = torus_grid(1, 123)
    f = uniform_density(g)
    assert f.mass() == pytest.approx(1.0)
    assert f.l1() == pytest.approx(1.0)
    assert f.linf() == pytest.approx(1.0)


def test_dirac_density_quadrature_mass():
    g = torus_grid(1, 300)
    f = dirac_density(g, np.zeros(1), weight=0.7)
    assert f.mass() == pytest.approx(0.7)
    assert np.count_nonzero(f.values) == 1
    # the single cell carries weight / cell volume
    assert f.linf() == pytest.approx(0.7 * 300)


def test_density_l1_uses_weights():
    g = torus_grid(1, 4)
    f = Density(g, np.array([1.0, -2.0, 3.0, 0.0]))
    assert f.l1() == pytest.approx(6.0 / 4.0)
    assert f.mass() == pytest.approx(2.0 / 4.0)
    assert f.linf() == pytest.approx(3.0)

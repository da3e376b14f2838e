import numpy as np
import pytest

from dislocflow.quadrature import QuadratureSpec, adaptive_panels, graded_offsets, panel_rule


def test_panel_rule_integrates_polynomials_exactly():
    edges = np.array([0.0, 0.3, 1.0, 2.5])
    s, w = panel_rule(edges, 8)
    assert np.isclose(w @ s ** 15, 2.5 ** 16 / 16, rtol=1e-13)


def test_graded_offsets_cover_one_period():
    s, w = graded_offsets(1e-4, 2 * np.pi, 0.4)
    assert np.isclose(w.sum(), 2 * np.pi, rtol=1e-14)
    assert s.min() >= -np.pi and s.max() <= np.pi


def test_graded_offsets_resolve_near_singular_line_integral():
    # int eps / (eps^2 + s^2)^(3/2) ds over [-pi, pi] in closed form
    for eps in (1e-2, 1e-4, 1e-6):
        s, w = graded_offsets(eps, 2 * np.pi, 0.4)
        exact = 2 * np.pi / (eps * np.sqrt(eps ** 2 + np.pi ** 2))
        val = w @ (eps / (eps ** 2 + s ** 2) ** 1.5)
        assert abs(val - exact) <= 1e-12 * exact


def test_innermost_panels_are_a_quarter_of_the_distance():
    s, _ = graded_offsets(1e-3, 2 * np.pi, 0.4, order=4)
    # one full panel of nodes in (0, d/4), the next panel starts at d/4
    assert np.count_nonzero((s > 0) & (s < 0.25e-3)) == 4
    assert np.count_nonzero((s > 0.25e-3) & (s < 0.5e-3)) == 4


def test_adaptive_panels_grade_toward_a_close_point():
    d = 1e-5

    def dist(s):
        return np.sqrt(d ** 2 + s ** 2)

    edges = adaptive_panels(dist, -1.0, 1.0, order=16, start=4, speed=1.0, near=d)
    lengths = np.diff(edges)
    centre = np.argmin(np.abs(0.5 * (edges[1:] + edges[:-1])))
    assert lengths[centre] <= 0.25 * d
    s, w = panel_rule(edges, 16)
    exact = 2 / (d * np.sqrt(d ** 2 + 1))
    assert np.isclose(w @ (d / dist(s) ** 3), exact, rtol=1e-12)


def test_spec_rejects_bad_settings():
    with pytest.raises(ValueError):
        QuadratureSpec(order=1)
    with pytest.raises(ValueError):
        QuadratureSpec(innermost=2.0)

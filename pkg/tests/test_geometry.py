import json
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.spatial.transform import Rotation

from dislocflow import curves
from dislocflow.geometry import (ClosedCurve, DegenerateCurveError, GeometryError, StraightSegment,
                                 TubeError, TubeWarning, adapted_frame, area_element,
                                 closest_point_projection, curvature_vector, embeddedness_radius,
                                 load_curve, resample_arclength, save_curve, tangent, tube_point)

from conftest import random_smooth_field


def trefoil_nodes(n):
    t = 2 * np.pi * np.arange(n) / n
    return np.stack([np.sin(t) + 2 * np.sin(2 * t), np.cos(t) - 2 * np.cos(2 * t),
                     -np.sin(3 * t)], axis=1)


def trefoil_speed(t):
    return np.linalg.norm([np.cos(t) + 4 * np.cos(2 * t), -np.sin(t) + 4 * np.sin(2 * t),
                           -3 * np.cos(3 * t)])


# ---------------------------------------------------------------- resampling

def test_resampling_equalizes_a_nonuniform_circle():
    u = 2 * np.pi * np.arange(64) / 64
    phi = u + 0.3 * np.sin(u)
    c = ClosedCurve(np.stack([np.cos(phi), np.sin(phi), 0 * phi], axis=1))
    r = resample_arclength(c, 64)
    chords = np.linalg.norm(np.roll(r.nodes, -1, axis=0) - r.nodes, axis=1)
    assert np.ptp(chords) < 1e-10
    assert np.allclose(np.linalg.norm(r.nodes, axis=1), 1.0, atol=1e-12)


def test_resampling_an_equispaced_curve_returns_the_same_nodes(unit_circle):
    r = resample_arclength(unit_circle, unit_circle.n)
    assert np.allclose(r.nodes, unit_circle.nodes, atol=1e-13)


def test_resampled_trefoil_keeps_its_length():
    exact = integrate.quad(trefoil_speed, 0, 2 * np.pi, epsabs=1e-13, limit=200)[0]
    r = resample_arclength(ClosedCurve(trefoil_nodes(256)), 128)
    assert abs(r.length - exact) < 1e-6
    sig = r.arclength_at(r.params)
    assert np.max(np.abs(sig - r.params)) < 1e-10 * r.length


def test_resampling_is_idempotent():
    once = resample_arclength(ClosedCurve(trefoil_nodes(256)), 256)
    twice = resample_arclength(once, 256)
    assert np.max(np.abs(once.nodes - twice.nodes)) < 1e-10


def test_degenerate_curves_are_rejected():
    pts = curves.circle().nodes.copy()
    pts[3] = pts[2]
    with pytest.raises(DegenerateCurveError, match="zero-length segment"):
        ClosedCurve(pts)
    with pytest.raises(DegenerateCurveError):
        ClosedCurve(np.zeros((4, 3)))
    with pytest.raises(DegenerateCurveError):
        resample_arclength(curves.circle(), 4)


# ---------------------------------------------------------------- tangent and curvature

@pytest.mark.parametrize("rho", [0.5, 1.0, 3.0])
def test_circle_tangent_and_curvature(rho):
    c = curves.circle(rho, 64)
    s = c.params
    want = np.stack([-np.sin(s / rho), np.cos(s / rho), 0 * s], axis=1)
    assert np.allclose(tangent(c), want, atol=1e-12)
    H = curvature_vector(c)
    assert np.allclose(np.linalg.norm(H, axis=1), 1 / rho, rtol=1e-10)
    assert np.allclose(H, -c.nodes / rho ** 2, atol=1e-10)


def test_segment_tangent_is_constant():
    seg = StraightSegment(direction=(0, 0, 2.0), half_length=3.0)
    assert np.allclose(tangent(seg), [0, 0, 1])


def test_ellipse_tangent_matches_closed_form():
    n = 256
    t = 2 * np.pi * np.arange(n) / n
    c = ClosedCurve(np.stack([2 * np.cos(t), np.sin(t), 0 * t], axis=1))
    d = np.stack([-2 * np.sin(t), np.cos(t), 0 * t], axis=1)
    assert np.allclose(tangent(c), d / np.linalg.norm(d, axis=1, keepdims=True), atol=1e-6)


def test_ellipse_curvature_at_major_vertex():
    c = curves.ellipse(2.0, 1.0, 512)
    H = curvature_vector(c)
    assert abs(np.linalg.norm(H[0]) - 2.0) < 1e-4         # node 0 sits at (a, 0, 0)
    assert np.allclose(c.nodes[0], [2, 0, 0], atol=1e-12)
    assert np.max(np.abs(np.einsum("ni,ni->n", H, tangent(c)))) < 1e-8


# ---------------------------------------------------------------- adapted frame

def test_planar_curve_uses_the_plane_normal():
    ch = adapted_frame(curves.ellipse())
    assert np.allclose(ch.reference_direction, [0, 0, 1])
    assert np.allclose(ch.n1, [0, 0, 1], atol=1e-12)
    assert np.allclose(ch.n2, np.cross(tangent(ch.curve), [0, 0, 1]), atol=1e-12)


def test_segment_frame_with_given_direction():
    seg = StraightSegment()
    ch = adapted_frame(seg, reference_direction=(1, 0, 0))
    assert np.allclose(ch.n1, [1, 0, 0]) and np.allclose(ch.n2, [0, 1, 0])


def test_perturbed_circle_clearance_against_sampled_tangents():
    c = curves.perturbed_circle(amplitude=0.05, seed=3)
    ch = adapted_frame(c, reference_direction=(0, 0, 1))
    # finite-difference tangents on a dense evaluation, independent of the spectral derivative
    s = np.linspace(0, c.length, 20001)[:-1]
    p = c.evaluate(s)
    d = np.roll(p, -1, axis=0) - np.roll(p, 1, axis=0)
    tz = np.abs(d[:, 2] / np.linalg.norm(d, axis=1))
    oracle = np.sqrt(2 - 2 * tz.max())
    assert ch.clearance >= 0.5
    assert abs(ch.clearance - oracle) < 1e-3


@pytest.mark.parametrize("name", sorted(curves.BUNDLED))
def test_frame_is_orthonormal_right_handed_and_continuous(name):
    c = curves.bundled(name)
    ch = adapted_frame(c)
    frame = np.stack([c.tangent, ch.n1, ch.n2], axis=1)           # (n, 3, 3)
    gram = frame @ frame.transpose(0, 2, 1)
    assert np.max(np.abs(gram - np.eye(3))) < 1e-10
    assert np.allclose(np.linalg.det(frame), 1.0, atol=1e-10)
    jumps = np.linalg.norm(np.roll(ch.n1, -1, axis=0) - ch.n1, axis=1)
    # smooth frame: consecutive normals differ by O(spacing), the seam included
    assert jumps.max() < 20 * c.spacing


def test_frame_ignores_second_derivative_on_straight_sides():
    c = curves.stadium()
    H = np.linalg.norm(c.curvature, axis=1)
    flat = H < 1e-6
    assert flat.sum() > 20
    ch = adapted_frame(c)
    assert np.allclose(ch.n1[flat], ch.n1[flat][0], atol=1e-6)


def test_no_admissible_direction_reports_clearance():
    from dislocflow.geometry import FrameError
    with pytest.raises(FrameError) as info:
        adapted_frame(curves.ellipse(), reference_direction=(1, 0, 0))
    assert info.value.clearance < 1e-3


# ---------------------------------------------------------------- tube coordinates

def test_tube_point_on_the_core_and_on_a_segment():
    ch = adapted_frame(curves.ellipse())
    assert np.allclose(tube_point(ch, 1.1, 0.0, 2.0), ch.curve.evaluate(1.1))
    seg = adapted_frame(StraightSegment(), reference_direction=(1, 0, 0))
    assert np.allclose(tube_point(seg, 0.0, 1e-3, 0.0), [1e-3, 0, 0])


def test_tube_points_sit_at_the_requested_distance(unit_circle):
    ch = adapted_frame(unit_circle)
    th = np.linspace(0, 2 * np.pi, 17)
    pts = tube_point(ch, 0.7, 0.1, th)
    dense = curves.circle(1.0, 200000).nodes
    d = [np.min(np.linalg.norm(dense - p, axis=1)) for p in pts]
    assert np.allclose(d, 0.1, atol=1e-8)


def test_tube_point_warns_beyond_the_embeddedness_radius(unit_circle):
    ch = adapted_frame(unit_circle)
    with pytest.warns(TubeWarning):
        tube_point(ch, 0.0, 1.5, 0.0)


def test_area_element_values(unit_circle):
    seg = adapted_frame(StraightSegment(), reference_direction=(1, 0, 0))
    assert area_element(seg, 0.0, 0.2, 1.3) == pytest.approx(0.2, abs=1e-15)
    ch = adapted_frame(unit_circle)
    # n2 = tau x e3 points outward on a counterclockwise circle, so theta = 3 pi / 2 faces the centre
    assert area_element(ch, 0.4, 0.1, 1.5 * np.pi) == pytest.approx(0.09, abs=1e-12)
    assert area_element(ch, 0.4, 0.1, 0.5 * np.pi) == pytest.approx(0.11, abs=1e-12)
    with pytest.raises(GeometryError, match="theta"):
        area_element(ch, 0.4, 1.5, 1.5 * np.pi)


def triangulated_tube_area(chart, r, ns=1200, nt=200):
    s = np.linspace(0, chart.curve.length, ns, endpoint=False)
    th = 2 * np.pi * np.arange(nt) / nt
    P = tube_point(chart, s[:, None], r, th[None, :])
    P1 = np.roll(P, -1, axis=0)
    P2 = np.roll(P, -1, axis=1)
    P3 = np.roll(P1, -1, axis=1)
    a = 0.5 * np.linalg.norm(np.cross(P1 - P, P2 - P), axis=-1)
    b = 0.5 * np.linalg.norm(np.cross(P1 - P3, P2 - P3), axis=-1)
    return (a + b).sum()


@pytest.mark.parametrize("name", ["ellipse", "torus_knot"])
def test_integrated_area_element_equals_tube_area(name):
    c = curves.bundled(name)
    ch = adapted_frame(c)
    r = 0.3 * c.embeddedness_radius
    ns, nt = c.n, 16
    s = c.params[:, None]
    th = 2 * np.pi * np.arange(nt)[None, :] / nt
    val = np.sum(area_element(ch, s, r, th) * c.speed[:, None]) * c.spacing * 2 * np.pi / nt
    assert val == pytest.approx(2 * np.pi * r * c.length, rel=1e-10)
    assert triangulated_tube_area(ch, r) == pytest.approx(val, rel=1e-4)


# ---------------------------------------------------------------- embeddedness

def test_circle_embeddedness_radius():
    assert embeddedness_radius(curves.circle(1.0)) == pytest.approx(1.0, rel=1e-12)
    assert embeddedness_radius(curves.circle(2.0)) == pytest.approx(2.0, rel=1e-12)


def test_two_lobed_curve_is_limited_by_its_waist():
    c = curves.dumbbell(gap=0.3)
    # exhaustive oracle on a dense sampling: pairs far apart along the curve
    s = np.linspace(0, c.length, 3000, endpoint=False)
    p = c.evaluate(s)
    D = np.linalg.norm(p[:, None] - p[None], axis=-1)
    sep = np.abs(s[:, None] - s[None])
    sep = np.minimum(sep, c.length - sep)
    waist = D[sep > 0.25 * c.length].min()
    kmax = np.max(np.linalg.norm(c.refined(2048).curvature, axis=1))
    assert waist == pytest.approx(0.3, abs=1e-6)
    assert 1 / kmax > 0.15
    assert embeddedness_radius(c) == pytest.approx(0.15, abs=1e-6)


def test_tube_coordinates_are_injective_below_the_radius():
    c = curves.ellipse()
    ch = adapted_frame(c)
    r = 0.95 * embeddedness_radius(c)
    s = np.linspace(0, c.length, 400, endpoint=False)
    th = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    P = tube_point(ch, s[:, None], r, th[None, :]).reshape(-1, 3)
    dense = c.evaluate(np.linspace(0, c.length, 40000, endpoint=False))
    nearest = np.array([np.min(np.linalg.norm(dense - p, axis=1)) for p in P])
    assert np.allclose(nearest, r, atol=1e-6)


# ---------------------------------------------------------------- projection

def test_projection_round_trip_and_core_points(ellipse_curve):
    ch = adapted_frame(ellipse_curve)
    s0 = 2.345
    assert closest_point_projection(ch, ellipse_curve.evaluate(s0)) == pytest.approx((s0, 0, 0))
    for s0, r0, t0 in [(0.3, 0.2, 1.0), (5.0, 0.05, 4.0), (9.0, 0.4, 6.0)]:
        s, r, t = closest_point_projection(ch, tube_point(ch, s0, r0, t0))
        assert abs(s - s0) < 1e-8 and abs(r - r0) < 1e-8 and abs(t - t0) < 1e-8


def test_projection_matches_brute_force(ellipse_curve):
    ch = adapted_frame(ellipse_curve)
    rng = np.random.default_rng(5)
    sd = np.linspace(0, ellipse_curve.length, 200001)[:-1]
    dense = ellipse_curve.evaluate(sd)
    for _ in range(5):
        x = tube_point(ch, rng.uniform(0, ellipse_curve.length), rng.uniform(0.01, 0.45),
                       rng.uniform(0, 2 * np.pi))
        d = np.linalg.norm(dense - x, axis=1)
        s, r, _ = closest_point_projection(ch, x)
        assert abs(r - d.min()) < 1e-8
        assert abs(s - sd[np.argmin(d)]) < 1e-3


def test_projection_outside_tube_carries_candidate(unit_circle):
    ch = adapted_frame(unit_circle)
    with pytest.raises(TubeError) as info:
        closest_point_projection(ch, [0.0, 0.0, 3.0])
    assert info.value.candidate[1] == pytest.approx(np.sqrt(10))


# ---------------------------------------------------------------- invariances

@given(st.integers(0, 10 ** 6))
def test_rigid_motions_commute_with_differential_quantities(seed):
    rng = np.random.default_rng(seed)
    Q = Rotation.random(random_state=seed).as_matrix()
    shift = rng.normal(size=3)
    c = curves.perturbed_circle(seed=seed % 17, n=64)
    m = c.transformed(Q, shift)
    assert m.length == pytest.approx(c.length, rel=1e-12)
    assert np.allclose(m.tangent, c.tangent @ Q.T, atol=1e-11)
    assert np.allclose(m.curvature, c.curvature @ Q.T, atol=1e-9)
    assert m.embeddedness_radius == pytest.approx(c.embeddedness_radius, rel=1e-8)


@given(st.integers(0, 10 ** 6), st.floats(0.0, 0.08))
def test_area_identity_holds_for_random_perturbations(seed, amp):
    c = ClosedCurve(curves.circle(1.0, 64).nodes + amp * random_smooth_field(64, seed))
    ch = adapted_frame(c)
    r = 0.5 * c.embeddedness_radius
    th = 2 * np.pi * np.arange(8) / 8
    val = np.sum(area_element(ch, c.params[:, None], r, th[None, :]) * c.speed[:, None])
    assert val * c.spacing * 2 * np.pi / 8 == pytest.approx(2 * np.pi * r * c.length, rel=1e-10)


# ---------------------------------------------------------------- file format

def test_curve_file_round_trip(tmp_path, ellipse_curve):
    path = tmp_path / "c.json"
    save_curve(ellipse_curve, path)
    doc = json.loads(path.read_text())
    assert doc["closed"] is True and len(doc["nodes"]) == ellipse_curve.n
    assert np.array_equal(load_curve(path).nodes, ellipse_curve.nodes)


@pytest.mark.parametrize("text", ['{"nodes": [[0, 0]]}', "not json", '{"closed": true}',
                                  '{"nodes": [[0,0,0]], "closed": false}'])
def test_malformed_curve_files_are_rejected(tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    with pytest.raises(GeometryError):
        load_curve(path)

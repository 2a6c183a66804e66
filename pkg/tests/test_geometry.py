import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from afdc import geometry
from afdc.errors import (
    CountMismatch,
    DegenerateChord,
    EmptyFile,
    MalformedLine,
    NonPositiveClearance,
    SurfaceSplitFailure,
    TooFewPoints,
)
from conftest import flat_plate

LEDNICER_PLATE = "plate\n3. 3.\n\n0.0 0.0\n0.5 0.0\n1.0 0.0\n\n0.0 0.0\n0.5 0.0\n1.0 0.0\n"


# format detection -------------------------------------------------------------

def test_detect_selig():
    assert geometry.detect_format("foo\n1.0 0.0\n0.0 0.0\n1.0 -0.0") == geometry.SELIG


def test_detect_lednicer():
    text = "foo\n61. 61.\n0.0 0.0\n1.0 0.0"
    assert geometry.detect_format(text) == geometry.LEDNICER


def test_detect_empty():
    with pytest.raises(EmptyFile):
        geometry.detect_format("")
    with pytest.raises(EmptyFile):
        geometry.detect_format("\n  \n")


def test_detect_needs_both_counts_above_one():
    assert geometry.detect_format("foo\n61. 0.5\n0 0\n1 0") == geometry.SELIG


# selig -------------------------------------------------------------------------------

def test_parse_selig_triangle():
    g = geometry.parse_selig("tri\n1 0\n0 0\n1 -0.1")
    assert g.name == "tri"
    np.testing.assert_array_equal(g.points, [[1, 0], [0, 0], [1, -0.1]])


def test_parse_selig_trims_name_and_whitespace():
    g = geometry.parse_selig("  my foil \r\n 1.0\t0.0 \r\n\r\n0 0\r\n1   -0.1\r\n")
    assert g.name == "my foil"
    assert len(g) == 3


def test_parse_selig_malformed_line_number():
    with pytest.raises(MalformedLine) as info:
        geometry.parse_selig("foo\n1 0\nx y\n0 0\n1 0")
    assert info.value.line_number == 3


def test_parse_selig_too_few_points():
    with pytest.raises(TooFewPoints):
        geometry.parse_selig("foo\n1 0\n0 0\n")


# lednicer ----------------------------------------------------------------------------

def test_parse_lednicer_flat_plate():
    g = geometry.parse_lednicer(LEDNICER_PLATE)
    np.testing.assert_array_equal(g.points, [[1, 0], [0.5, 0], [0, 0], [0.5, 0], [1, 0]])


def test_parse_lednicer_count_mismatch():
    text = "plate\n4. 3.\n0 0\n0.5 0\n1 0\n0 0\n0.5 0\n1 0\n"
    with pytest.raises(CountMismatch):
        geometry.parse_lednicer(text)


def test_parse_dispatches_on_format():
    assert len(geometry.parse(LEDNICER_PLATE)) == 5


def test_lednicer_round_trip_through_selig(naca2412):
    text = geometry.serialize_lednicer(naca2412)
    assert geometry.detect_format(text) == geometry.LEDNICER
    back = geometry.parse(text)
    np.testing.assert_array_equal(back.points, naca2412.points)


def test_selig_round_trip(naca2412):
    back = geometry.parse(geometry.serialize_selig(naca2412))
    assert back == naca2412


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0.001, 1)), min_size=2, max_size=20),
       st.lists(st.tuples(st.floats(0, 1), st.floats(-1, -0.001)), min_size=2, max_size=20))
def test_serialize_parse_identity_property(upper, lower):
    # coordinates stay in the unit-chord box, where a first pair can never read as counts;
    # the unique leftmost point is the leading edge both layouts split at
    pts = np.array(upper[::-1] + [(-0.5, 0.0)] + lower)
    g = geometry.AirfoilGeometry("prop", pts)
    assert geometry.parse(geometry.serialize_selig(g)) == g
    assert geometry.parse(geometry.serialize_lednicer(g)) == g


# normalize ---------------------------------------------------------------------------

def test_normalize_identity_on_unit_chord():
    g = geometry.parse_selig("tri\n1 0\n0 0.1\n1 -0.1")
    np.testing.assert_array_equal(geometry.normalize(g).points, g.points)


def test_normalize_scales_uniformly():
    g = geometry.AirfoilGeometry("s", [[4, 0], [2, 0.2], [3, 0.1]])
    n = geometry.normalize(g)
    np.testing.assert_allclose(n.points, [[1, 0], [0, 0.1], [0.5, 0.05]], atol=1e-15)


def test_normalize_degenerate():
    with pytest.raises(DegenerateChord):
        geometry.normalize(geometry.AirfoilGeometry("v", [[1, 0], [1, 1], [1, 2]]))


@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=3, max_size=30))
def test_normalize_idempotent(pts):
    pts = np.array(pts)
    if np.ptp(pts[:, 0]) < 1e-3:
        return
    once = geometry.normalize(geometry.AirfoilGeometry("p", pts))
    assert once.points[:, 0].min() == 0.0
    assert once.points[:, 0].max() == 1.0
    np.testing.assert_array_equal(geometry.normalize(once).points, once.points)


# pose -----------------------------------------------------------------------------------

def test_pose_zero_aoa_translates_only():
    plate = flat_plate()
    s = geometry.pose(plate, 0.0, 0.2)
    np.testing.assert_array_equal(s.polygon[:, 0], plate.points[:, 0])
    np.testing.assert_allclose(s.polygon[:, 1], 0.2, atol=1e-15)


def test_rotation_quarter_turn_about_quarter_chord():
    # positive aoa pitches the leading edge up, so a point aft of the pivot goes down
    out = geometry.rotate(np.array([[1.25, 0.0]]), 90.0)
    np.testing.assert_allclose(out, [[0.25, -1.0]], atol=1e-12)
    lead = geometry.rotate(np.array([[0.0, 0.0]]), 10.0)
    assert lead[0, 1] > 0


def test_pose_preserves_chord(naca2412):
    s = geometry.pose(naca2412, 13.7, 0.3)
    le, te = naca2412.points.argmin(axis=0)[0], 0
    d = np.linalg.norm(s.polygon[le] - s.polygon[te])
    d0 = np.linalg.norm(naca2412.points[le] - naca2412.points[te])
    assert abs(d - d0) < 1e-9
    assert abs(d - 1.0) < 1e-9


def test_pose_rejects_non_positive_clearance(naca2412):
    with pytest.raises(NonPositiveClearance):
        geometry.pose(naca2412, 5.0, 0.0)
    with pytest.raises(NonPositiveClearance):
        geometry.pose(naca2412, 5.0, -0.1)


@given(st.floats(-30, 30), st.floats(0.01, 2.0))
def test_pose_is_rigid_and_sits_at_clearance(aoa, h):
    g = geometry.naca4("4415", n_side=15)
    s = geometry.pose(g, aoa, h)
    assert abs(s.polygon[:, 1].min() - h) <= 1e-9
    d_before = np.linalg.norm(g.points[:, None] - g.points[None], axis=-1)
    d_after = np.linalg.norm(s.polygon[:, None] - s.polygon[None], axis=-1)
    assert np.abs(d_after - d_before).max() <= 1e-9


# camber line ------------------------------------------------------------------------------

def test_camber_symmetric_section_is_zero():
    c = geometry.camber_line(geometry.naca4("0012"), 50)
    assert c.shape == (51, 2)
    assert np.abs(c[:, 1]).max() <= 1e-12


def test_camber_flat_plate():
    c = geometry.camber_line(flat_plate(9), 20)
    np.testing.assert_array_equal(c[:, 1], 0.0)


def test_camber_cosine_stations():
    c = geometry.camber_line(geometry.naca4("0012"), 10)
    expected = 0.5 * (1 - np.cos(np.pi * np.arange(11) / 10))
    np.testing.assert_allclose(c[:, 0], expected, atol=1e-15)


def _naca2412_vertical(n_side=120):
    # thickness added vertically to the mean line, so the surface midpoint is the camber
    x = geometry.cosine_stations(n_side)
    yt = 0.6 * (0.2969 * np.sqrt(x) - 0.1260 * x - 0.3516 * x**2 + 0.2843 * x**3 - 0.1036 * x**4)
    m, p = 0.02, 0.4
    yc = np.where(x < p, m / p**2 * (2 * p * x - x**2),
                  m / (1 - p)**2 * ((1 - 2 * p) + 2 * p * x - x**2))
    pts = np.concatenate([np.c_[x, yc + yt][::-1], np.c_[x, yc - yt][1:]])
    return geometry.AirfoilGeometry("2412 vertical", pts)


def test_camber_matches_naca_2412_polynomial():
    # independent oracle: the published 4-digit mean line, m = 0.02, p = 0.4
    c = geometry.camber_line(_naca2412_vertical(), 100)
    x = c[:, 0]
    m, p = 0.02, 0.4
    yc = np.where(x < p, m / p**2 * (2 * p * x - x**2),
                  m / (1 - p)**2 * ((1 - 2 * p) + 2 * p * x - x**2))
    assert np.abs(c[:, 1] - yc).max() < 1e-3


def test_camber_of_standard_naca_section_away_from_leading_edge():
    # the standard construction offsets thickness normal to the mean line, which moves
    # the vertical midpoint near the nose; aft of 5% chord it still tracks the mean line
    c = geometry.camber_line(geometry.naca4("2412", n_side=200), 100)
    yc, _ = geometry.naca4_camber("2412", c[:, 0])
    aft = c[:, 0] > 0.05
    assert np.abs(c[aft, 1] - yc[aft]).max() < 1e-3


def test_camber_rejects_small_n(naca2412):
    with pytest.raises(ValueError):
        geometry.camber_line(naca2412, 9)


def test_camber_split_failure():
    g = geometry.AirfoilGeometry("bad", [[0, 0], [0.5, 0.1], [1, 0]])
    with pytest.raises(SurfaceSplitFailure):
        geometry.camber_line(g, 10)


# geometry value type ------------------------------------------------------------------------

def test_geometry_rejects_non_finite():
    with pytest.raises(ValueError):
        geometry.AirfoilGeometry("n", [[0, 0], [1, math.nan], [1, 0]])


def test_geometry_points_read_only(naca2412):
    with pytest.raises(ValueError):
        naca2412.points[0, 0] = 3.0


def test_load_dat_crlf(tmp_path):
    p = tmp_path / "f.dat"
    p.write_bytes(b"foo\r\n1 0\r\n0 0\r\n1 -0.1\r\n")
    assert len(geometry.load_dat(p)) == 3

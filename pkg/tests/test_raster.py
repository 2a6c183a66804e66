import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from afdc import geometry, kernels, raster
from afdc.errors import PolygonOutOfWindow
from afdc.raster import BinaryImage, GridSpec

UNIT = GridSpec(8, 8, 0.0, 1.0, 0.0, 1.0)


def _regular_polygon(k, radius, cx, cy):
    t = 2 * np.pi * np.arange(k) / k
    return np.c_[cx + radius * np.cos(t), cy + radius * np.sin(t)]


def _shoelace(p):
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def test_grid_defaults():
    g = GridSpec()
    assert (g.width, g.height) == (128, 128)
    assert (g.x0, g.x1, g.y0, g.y1) == (-0.5, 1.5, -0.5, 1.5)


@pytest.mark.parametrize("kw", [dict(width=7), dict(height=4), dict(x0=1.0, x1=1.0), dict(y0=2.0, y1=1.0)])
def test_grid_invariants(kw):
    with pytest.raises(ValueError):
        GridSpec(**kw)


def test_square_covering_window_fills_all():
    sq = np.array([[-1, -1], [2, -1], [2, 2], [-1, 2]], dtype=float)
    img = raster.rasterize(sq, UNIT, draw_ground=False)
    assert img.count() == 64


def test_half_window_triangle_against_brute_force():
    grid = GridSpec(32, 32, 0.0, 1.0, 0.0, 1.0)
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    img = raster.rasterize(tri, grid, draw_ground=False)
    # brute force: inclusive half-plane test of every pixel center
    xs, ys = grid.centers()
    gx, gy = np.meshgrid(xs, ys)
    brute = (gx >= 0) & (gy >= 0) & (gx + gy <= 1.0 + 1e-12)
    np.testing.assert_array_equal(img.pixels, brute.astype(np.uint8))
    assert abs(img.count() - 512) <= 0.06 * 512


def test_ground_band_bottom_quarter():
    img = raster.rasterize(np.zeros((0, 2)), GridSpec(), draw_ground=True)
    assert img.pixels[-32:].all()
    assert not img.pixels[:-32].any()


def test_row_zero_is_top():
    grid = GridSpec(8, 8, 0.0, 1.0, 0.0, 1.0)
    top = np.array([[0, 0.75], [1, 0.75], [1, 1], [0, 1]], dtype=float)
    img = raster.rasterize(top, grid, draw_ground=False)
    assert img.pixels[:2].all() and not img.pixels[2:].any()


def test_polygon_out_of_window():
    with pytest.raises(PolygonOutOfWindow):
        raster.rasterize(np.array([[5.0, 5.0], [6.0, 5.0], [6.0, 6.0]]), GridSpec())


def test_edge_points_count_as_inside():
    grid = GridSpec(8, 8, 0.0, 1.0, 0.0, 1.0)
    # edges pass exactly through the pixel centers at 0.0625 and 0.4375
    sq = np.array([[0.0625, 0.0625], [0.4375, 0.0625], [0.4375, 0.4375], [0.0625, 0.4375]])
    assert raster.rasterize(sq, grid, False).count() == 16


def test_filled_area_converges_for_convex_polygon():
    poly = _regular_polygon(9, 0.6, 0.45, 0.55)
    area = _shoelace(poly)
    errs = []
    for n in (32, 64, 128):
        g = GridSpec(n, n)
        img = raster.rasterize(poly, g, draw_ground=False)
        errs.append(abs(img.count() * g.pixel_area - area) / area)
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.02


def test_rasterize_deterministic(naca2412):
    s = geometry.pose(naca2412, 7.5, 0.3)
    assert raster.rasterize(s) == raster.rasterize(s)


def test_airfoil_image_has_section_and_ground(naca2412):
    img = raster.rasterize(geometry.pose(naca2412, 5.0, 0.3))
    band = 32
    assert img.pixels[-band:].all()
    assert 0 < img.pixels[:-band].sum() < 0.2 * img.pixels[:-band].size



def test_airfoil_pixel_count_matches_area(naca2412):
    s = geometry.pose(naca2412, 0.0, 0.5)
    g = GridSpec()
    px_area = (g.x1 - g.x0) / g.width * (g.y1 - g.y0) / g.height
    inked = raster.rasterize(s, draw_ground=False).count()
    assert inked * px_area == pytest.approx(_shoelace(s.polygon), rel=0.05)


def test_images_differ_across_angles(naca2412):
    a = raster.rasterize(geometry.pose(naca2412, 0.0, 0.5))
    b = raster.rasterize(geometry.pose(naca2412, 4.0, 0.5))
    assert (a.pixels != b.pixels).sum() > 20


@pytest.mark.parametrize("backend", ["numpy_backend", "numba_backend"])
def test_repeated_closing_vertex_is_ignored(backend):
    mod = getattr(kernels, backend)
    if mod is None:
        pytest.skip("numba unavailable")
    tri = np.array([[0.1, 0.1], [0.9, 0.1], [0.1, 0.9]])
    closed = np.vstack([tri, tri[:1]])
    pts = np.array([[0.2, 0.2], [0.8, 0.8], [0.95, 0.5]])
    got = mod.points_in_polygon(pts[:, 0].copy(), pts[:, 1].copy(), closed, 1e-12)
    np.testing.assert_array_equal(got, [True, False, False])

@given(st.integers(3, 12), st.floats(0.05, 0.9), st.floats(-0.2, 1.2), st.floats(-0.2, 1.2))
def test_point_in_polygon_backends_agree(k, r, cx, cy):
    poly = _regular_polygon(k, r, cx, cy)
    px = np.linspace(-0.5, 1.5, 37)
    gx, gy = np.meshgrid(px, px)
    a = kernels.numpy_backend.points_in_polygon(gx.ravel(), gy.ravel(), poly, 1e-12)
    if kernels.numba_backend is not None:
        b = kernels.numba_backend.points_in_polygon(gx.ravel(), gy.ravel(), poly, 1e-12)
        np.testing.assert_array_equal(a, b)


# morphology ---------------------------------------------------------------------------

def test_dilate_single_pixel():
    px = np.zeros((7, 7), dtype=np.uint8)
    px[3, 3] = 1
    out = raster.dilate3x3(BinaryImage(px)).pixels
    expected = np.zeros((7, 7), dtype=np.uint8)
    expected[2:5, 2:5] = 1
    np.testing.assert_array_equal(out, expected)


def test_erode_all_ones_unchanged():
    ones = BinaryImage(np.ones((9, 5), dtype=np.uint8))
    assert raster.erode3x3(ones) == ones


def test_border_clamped_neighbourhood():
    px = np.zeros((4, 4), dtype=np.uint8)
    px[:, :2] = 1
    # the clamped border replicates column 0; zero padding would erode it away
    np.testing.assert_array_equal(raster.erode3x3(BinaryImage(px)).pixels[:, 0], 1)


def test_closing_contains_original_random_images():
    rng = np.random.default_rng(7)
    for _ in range(500):
        px = (rng.random((16, 16)) < rng.random()).astype(np.uint8)
        closed = raster.closing(BinaryImage(px)).pixels
        assert np.all(closed >= px)


images16 = arrays(np.uint8, (16, 16), elements=st.integers(0, 1))


@given(images16, images16)
def test_morphology_monotone(a, b):
    lo = np.minimum(a, b)
    for op in (raster.dilate3x3, raster.erode3x3):
        assert np.all(op(BinaryImage(lo)).pixels <= op(BinaryImage(a)).pixels)


# tensors and files --------------------------------------------------------------------

def test_to_tensor_example():
    img = BinaryImage(np.array([[1, 0], [0, 1]], dtype=np.uint8))
    t = raster.to_tensor(img)
    assert t.shape == (1, 2, 2) and t.dtype == np.float64
    np.testing.assert_array_equal(t, [[[1.0, 0.0], [0.0, 1.0]]])


@given(images16)
def test_tensor_round_trip(px):
    img = BinaryImage(px)
    t = raster.to_tensor(img)
    assert t.sum() == img.count()
    assert raster.from_tensor(t) == img


def test_binary_image_rejects_non_binary():
    with pytest.raises(ValueError):
        BinaryImage(np.array([[0, 2]]))


def test_pgm_round_trip(tmp_path, naca2412):
    img = raster.rasterize(geometry.pose(naca2412, 3.0, 0.4))
    path = tmp_path / "a.pgm"
    raster.write_pgm(img, path)
    data = path.read_bytes()
    assert data.startswith(b"P5\n128 128\n255\n")
    assert set(np.frombuffer(data[15:], dtype=np.uint8)) <= {0, 255}
    assert raster.read_pgm(path) == img

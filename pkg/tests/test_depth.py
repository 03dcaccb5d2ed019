import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from navbench.depth import (AlphaOutOfRange, DegenerateAnchors, DisparityImage, EmptyOutput, ScaleShift,
                            ScaleSmoother, SparseAnchors, TooFewAnchors, edge_mask, fit_scale_shift, metricize,
                            smooth_scale_shift, sobel_magnitude)
from navbench.geometry import CameraIntrinsics, Pose3

K = CameraIntrinsics.from_hfov(64, 48, math.pi / 2)


def anchors_from(disp, u, v, s, b):
    d = disp[v, u]
    return SparseAnchors(u.astype(float), v.astype(float), 1.0 / (s * d + b))


def normal_equation_oracle(d, y):
    a = np.column_stack([d, np.ones_like(d)])
    return np.linalg.solve(a.T @ a, a.T @ y)


# ---------------------------------------------------------------- fitting

def test_exact_affine_recovered():
    rng = np.random.default_rng(0)
    disp = rng.uniform(0.1, 1.0, (20, 20))
    u = np.array([1, 5, 9, 13, 17])
    v = np.array([2, 4, 6, 8, 10])
    ss = fit_scale_shift(DisparityImage.from_values(disp), anchors_from(disp, u, v, 2.0, 0.5))
    assert abs(ss.s - 2.0) < 1e-9 and abs(ss.b - 0.5) < 1e-9


def test_noisy_fit_matches_normal_equations():
    rng = np.random.default_rng(1)
    disp = rng.uniform(0.05, 1.0, (40, 40))
    idx = rng.choice(1600, 50, replace=False)
    v, u = np.unravel_index(idx, disp.shape)
    y = 1.5 * disp[v, u] + 0.2 + rng.normal(0.0, 0.01, 50)
    anchors = SparseAnchors(u.astype(float), v.astype(float), 1.0 / y)
    ss = fit_scale_shift(DisparityImage.from_values(disp), anchors, robust=False)
    s, b = normal_equation_oracle(disp[v, u], y)
    assert abs(ss.s - s) < 1e-9 and abs(ss.b - b) < 1e-9


def test_robust_fit_ignores_gross_outlier():
    rng = np.random.default_rng(2)
    disp = rng.uniform(0.05, 1.0, (40, 40))
    idx = rng.choice(1600, 30, replace=False)
    v, u = np.unravel_index(idx, disp.shape)
    y = 1.5 * disp[v, u] + 0.2 + rng.normal(0.0, 1e-3, 30)
    y[0] *= 3.0
    anchors = SparseAnchors(u.astype(float), v.astype(float), 1.0 / y)
    ss = fit_scale_shift(DisparityImage.from_values(disp), anchors, robust=True)
    s, b = normal_equation_oracle(disp[v, u][1:], y[1:])
    assert abs(ss.s - s) < 1e-9 and abs(ss.b - b) < 1e-9


def test_identical_disparities_are_degenerate():
    disp = np.full((10, 10), 0.4)
    anchors = SparseAnchors(np.arange(5.0), np.arange(5.0), np.full(5, 2.0))
    with pytest.raises(DegenerateAnchors):
        fit_scale_shift(DisparityImage.from_values(disp), anchors)


def test_single_anchor_is_too_few():
    disp = np.linspace(0, 1, 100).reshape(10, 10)
    with pytest.raises(TooFewAnchors):
        fit_scale_shift(DisparityImage.from_values(disp), SparseAnchors([1.0], [1.0], [2.0]))


def test_anchors_on_invalid_pixels_are_skipped():
    disp = np.linspace(0.1, 1, 100).reshape(10, 10)
    disp[0, :] = np.nan
    u = np.array([0, 1, 2, 3])
    v = np.array([0, 3, 5, 7])
    z = 1.0 / (2.0 * np.nan_to_num(disp[v, u], nan=1.0) + 0.1)
    ss = fit_scale_shift(DisparityImage.from_values(disp), SparseAnchors(u, v, z))
    assert ss.s == pytest.approx(2.0, abs=1e-9) and ss.b == pytest.approx(0.1, abs=1e-9)


@given(seed=st.integers(0, 10_000), ds=st.sampled_from([-1e-3, 0.0, 1e-3]), db=st.sampled_from([-1e-3, 0.0, 1e-3]))
def test_fit_is_a_global_minimum(seed, ds, db):
    rng = np.random.default_rng(seed)
    disp = rng.uniform(0.0, 1.0, (16, 16))
    n = int(rng.integers(3, 60))
    idx = rng.choice(256, n, replace=False)
    v, u = np.unravel_index(idx, disp.shape)
    y = rng.uniform(0.5, 2.0) * disp[v, u] + rng.uniform(-0.1, 0.1) + rng.normal(0, 0.02, n)
    y = np.abs(y) + 0.01
    ss = fit_scale_shift(DisparityImage.from_values(disp), SparseAnchors(u, v, 1.0 / y), robust=False)
    d = disp[v, u]

    def sse(s, b):
        return float(np.sum((s * d + b - y) ** 2))

    assert sse(ss.s, ss.b) <= sse(ss.s + ds, ss.b + db) + 1e-12


# ---------------------------------------------------------------- smoothing

def test_ema_example():
    out = smooth_scale_shift(ScaleShift(1.0, 0.0), ScaleShift(2.0, 1.0), 0.8)
    assert out.s == pytest.approx(1.2, abs=1e-15) and out.b == pytest.approx(0.2, abs=1e-15)


def test_ema_limits():
    prev, new = ScaleShift(1.0, 0.3), ScaleShift(2.5, -0.1)
    assert smooth_scale_shift(prev, new, 0.0) == new
    assert smooth_scale_shift(prev, new, 1.0) == prev


@pytest.mark.parametrize("alpha", [-0.1, 1.5, math.nan])
def test_alpha_out_of_range(alpha):
    with pytest.raises(AlphaOutOfRange):
        smooth_scale_shift(ScaleShift(1, 0), ScaleShift(1, 0), alpha)
    with pytest.raises(AlphaOutOfRange):
        ScaleSmoother(alpha)


def test_smoother_takes_first_estimate_as_is():
    sm = ScaleSmoother(0.8)
    assert sm.update(ScaleShift(3.0, 0.5)) == ScaleShift(3.0, 0.5)
    assert sm.update(ScaleShift(1.0, 0.0)).s == pytest.approx(0.8 * 3.0 + 0.2 * 1.0)


@given(alpha=st.floats(0.0, 0.99), s0=st.floats(-5, 5), target=st.floats(-5, 5))
def test_geometric_convergence(alpha, s0, target):
    cur = ScaleShift(s0, 0.0)
    for t in range(1, 15):
        cur = smooth_scale_shift(cur, ScaleShift(target, 0.0), alpha)
        assert abs(cur.s - target) == pytest.approx(alpha ** t * abs(s0 - target), rel=1e-9, abs=1e-12)


@given(alpha=st.floats(0.0, 1.0), a=st.tuples(st.floats(-10, 10), st.floats(-10, 10)),
       b=st.tuples(st.floats(-10, 10), st.floats(-10, 10)))
def test_ema_stays_in_envelope(alpha, a, b):
    out = smooth_scale_shift(ScaleShift(*a), ScaleShift(*b), alpha)
    tol = 1e-12
    assert min(a[0], b[0]) - tol <= out.s <= max(a[0], b[0]) + tol
    assert min(a[1], b[1]) - tol <= out.b <= max(a[1], b[1]) + tol


# ---------------------------------------------------------------- edge mask

def chebyshev_dilation_oracle(edges, radius):
    h, w = edges.shape
    out = np.zeros_like(edges)
    pts = np.argwhere(edges)
    for r in range(h):
        for c in range(w):
            for er, ec in pts:
                if max(abs(er - r), abs(ec - c)) <= radius:
                    out[r, c] = True
                    break
    return out


def test_uniform_image_has_empty_mask():
    assert not edge_mask(DisparityImage.from_values(np.full((30, 40), 0.3))).any()


def step_image():
    img = np.full((24, 40), 0.2)
    img[:, 20:] = 0.8
    return DisparityImage.from_values(img)


def test_step_edge_band_matches_bruteforce_dilation():
    disp = step_image()
    edges = edge_mask(disp, 0.05, 0)
    assert edges.any()
    assert np.array_equal(edge_mask(disp, 0.05, 5), chebyshev_dilation_oracle(edges, 5))
    cols = np.flatnonzero(edge_mask(disp, 0.05, 5).any(axis=0))
    assert cols.min() == 19 - 5 and cols.max() == 20 + 5


def test_radius_zero_is_edge_pixels_only():
    disp = step_image()
    mag = sobel_magnitude(disp.values)
    assert np.array_equal(edge_mask(disp, 0.05, 0), mag > 0.05 * 0.6)


def test_random_image_dilation_matches_oracle():
    rng = np.random.default_rng(4)
    disp = DisparityImage.from_values(ndimage_free_blobs(rng))
    for radius in (1, 2, 3):
        edges = edge_mask(disp, 0.2, 0)
        assert np.array_equal(edge_mask(disp, 0.2, radius), chebyshev_dilation_oracle(edges, radius))


def ndimage_free_blobs(rng):
    img = np.zeros((20, 25))
    for _ in range(4):
        r, c = rng.integers(0, 20), rng.integers(0, 25)
        img[max(r - 2, 0):r + 2, max(c - 3, 0):c + 3] = rng.uniform(0.3, 1.0)
    return img


def test_infinite_threshold_masks_nothing():
    assert not edge_mask(step_image(), math.inf, 5).any()


def test_sobel_on_unit_ramp_is_unit_slope():
    img = np.tile(np.arange(10.0), (8, 1))
    np.testing.assert_allclose(sobel_magnitude(img)[2:-2, 2:-2], 1.0, atol=1e-12)


@given(seed=st.integers(0, 1000), t1=st.floats(0.0, 1.0), t2=st.floats(0.0, 1.0), radius=st.integers(0, 4))
def test_mask_monotone_in_threshold(seed, t1, t2, radius):
    lo, hi = min(t1, t2), max(t1, t2)
    disp = DisparityImage.from_values(np.random.default_rng(seed).uniform(0, 1, (12, 14)))
    big, small = edge_mask(disp, lo, radius), edge_mask(disp, hi, radius)
    assert not np.any(small & ~big)


# ---------------------------------------------------------------- metricize

def plane_disparity(pose, k, plane_z=0.0):
    u, v, rays = k.pixel_rays(1)
    w = rays @ pose.rotation.T
    t = (plane_z - pose.translation[2]) / w[..., 2]
    z = np.where(t > 0, t, np.inf)  # rays have unit camera z, so t is the optical depth
    return np.where(np.isfinite(z), 1.0 / z, np.nan)


def test_plane_points_land_on_plane():
    pose = Pose3.camera((1.0, 2.0, 1.2), 0.3, math.radians(20))
    disp = DisparityImage.from_values(plane_disparity(pose, K))
    pts = metricize(disp, ScaleShift(1.0, 0.0), None, 1, pose, K, max_range=1e9)
    assert len(pts) > 0.3 * K.width * K.height
    # independent plane fit through the cloud
    c = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - c)
    n = vt[-1]
    assert np.max(np.abs((pts - c) @ n)) < 1e-6
    assert np.max(np.abs(pts[:, 2])) < 1e-6


def test_hidden_affine_inverted():
    pose = Pose3.camera((0.0, 0.0, 1.0), 0.0, math.radians(25))
    true = plane_disparity(pose, K)
    rel = 0.7 * true - 0.05
    disp = DisparityImage.from_values(rel)
    ss = ScaleShift(1 / 0.7, 0.05 / 0.7)
    pts = metricize(disp, ss, None, 1, pose, K, max_range=1e9)
    assert np.max(np.abs(pts[:, 2])) < 1e-6


def test_fully_masked_image_is_empty_output():
    disp = DisparityImage.from_values(np.full((10, 10), 0.5))
    with pytest.raises(EmptyOutput):
        metricize(disp, ScaleShift(1, 0), np.ones((10, 10), bool), 1, Pose3.identity(), K)


@pytest.mark.parametrize("shape", [(48, 64), (47, 63)])
def test_stride_two_halves_count_per_axis(shape):
    k = CameraIntrinsics.from_hfov(shape[1], shape[0], math.pi / 2)
    disp = DisparityImage.from_values(np.full(shape, 0.5))
    n1 = len(metricize(disp, ScaleShift(1, 0), None, 1, Pose3.identity(), k))
    n2 = len(metricize(disp, ScaleShift(1, 0), None, 2, Pose3.identity(), k))
    assert n1 == shape[0] * shape[1]
    assert n2 == math.ceil(shape[0] / 2) * math.ceil(shape[1] / 2)


def test_max_range_drops_far_points():
    disp = DisparityImage.from_values(np.linspace(0.01, 1.0, 64 * 48).reshape(48, 64))
    pts = metricize(disp, ScaleShift(1, 0), None, 1, Pose3.identity(), K, max_range=10.0)
    assert pts[:, 2].max() <= 10.0
    assert len(pts) == int(np.sum(disp.values >= 0.1))


@given(seed=st.integers(0, 10_000), s=st.floats(-3, 3), b=st.floats(-1, 1), stride=st.integers(1, 4))
def test_metricize_emits_only_positive_finite_depth(seed, s, b, stride):
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-0.2, 1.0, (48, 64))
    vals[rng.uniform(size=vals.shape) < 0.1] = np.nan
    disp = DisparityImage.from_values(vals)
    mask = rng.uniform(size=vals.shape) < 0.2
    try:
        pts = metricize(disp, ScaleShift(s, b), mask, stride, Pose3.identity(), K)
    except EmptyOutput:
        return
    assert np.all(np.isfinite(pts))
    assert np.all(pts[:, 2] > 0)


def test_non_finite_scale_rejected():
    disp = DisparityImage.from_values(np.full((4, 4), 0.5))
    with pytest.raises(ValueError):
        metricize(disp, ScaleShift(math.nan, 0.0), None, 1, Pose3.identity(), K)

import numpy as np
import pytest
from hypothesis import given, strategies as st

from navbench import _pykernels
from navbench.csf import ClothParams, EmptyCloud, classify, segment, simulate_cloth


def plane(n=10_000, seed=0, size=10.0):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0, size, (n, 2))
    return np.column_stack([xy, np.zeros(n)])


def plane_with_box(seed=0):
    rng = np.random.default_rng(seed)
    ground = plane(8000, seed)
    inside = (ground[:, 0] > 4) & (ground[:, 0] < 6) & (ground[:, 1] > 4) & (ground[:, 1] < 6)
    ground = ground[~inside]
    top = np.column_stack([rng.uniform(4, 6, (2000, 2)), np.full(2000, 0.5)])
    return ground, top


def node_has_points(cloud, cloth):
    j = np.rint((cloud[:, 0] - cloth.x0) / cloth.cell_size).astype(int)
    i = np.rint((cloud[:, 1] - cloth.y0) / cloth.cell_size).astype(int)
    has = np.zeros(cloth.heights.shape, bool)
    has[i, j] = True
    return has


@pytest.mark.parametrize("rigidness", [1, 2, 3])
def test_plane_cloth_is_flat(rigidness):
    cloud = plane()
    p = ClothParams(rigidness=rigidness)
    cloth = simulate_cloth(cloud, p)
    has = node_has_points(cloud, cloth)
    assert has[1:-1, 1:-1].all()
    assert np.max(np.abs(cloth.heights[has])) < 1e-3
    # the empty margin ring hangs on its springs: about one gravity step at the sides, two at the corners
    assert np.max(np.abs(cloth.heights)) < 2 * p.gravity_displacement


@pytest.mark.parametrize("rigidness", [1, 2, 3])
def test_plane_is_all_ground(rigidness):
    seg = segment(plane(), ClothParams(rigidness=rigidness))
    assert len(seg.obstacles) == 0 and len(seg.ground) == 10_000


def test_stiff_cloth_stays_off_box_pit():
    ground, top = plane_with_box()
    cloth = simulate_cloth(np.vstack([ground, top]), ClothParams(rigidness=3))
    under = cloth.height_at(top[:, 0], top[:, 1])
    assert np.max(np.abs(under)) <= 0.05


def test_box_top_is_obstacle_at_box_height():
    ground, top = plane_with_box()
    seg = segment(np.vstack([ground, top]), ClothParams(rigidness=3))
    tall = seg.obstacles[:, 2] > 0.4
    assert tall.sum() >= 0.95 * len(top)
    assert np.all(np.abs(seg.heights[tall] - 0.5) <= 0.1)


def test_empty_cloud():
    with pytest.raises(EmptyCloud):
        simulate_cloth(np.zeros((0, 3)))


def test_infinite_threshold_is_all_ground():
    ground, top = plane_with_box()
    cloud = np.vstack([ground, top])
    seg = classify(cloud, simulate_cloth(cloud), np.inf)
    assert len(seg.ground) == len(cloud)


def test_single_point_cloud():
    seg = segment(np.array([[1.0, 2.0, 3.0]]))
    assert len(seg.ground) == 1


@pytest.mark.parametrize("bad", [dict(cell_size=0), dict(class_threshold=0), dict(rigidness=4), dict(max_iterations=0)])
def test_params_validation(bad):
    with pytest.raises(ValueError):
        ClothParams(**bad)


def test_gravity_displacement_is_tenth_of_cell():
    assert ClothParams(cell_size=0.4).gravity_displacement == pytest.approx(0.04)


def random_scene(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 400))
    pts = np.column_stack([rng.uniform(-5, 5, (n, 2)), rng.normal(0, 0.1, n)])
    k = int(rng.integers(0, n // 3 + 1))
    pts[:k, 2] += rng.uniform(0.2, 2.0, k)
    return pts


@given(seed=st.integers(0, 10_000), rigidness=st.sampled_from([1, 2, 3]))
def test_partition_and_non_negative_heights(seed, rigidness):
    cloud = random_scene(seed)
    seg = segment(cloud, ClothParams(rigidness=rigidness, max_iterations=200))
    assert len(seg.ground) + len(seg.obstacles) == len(cloud)
    assert np.all(seg.heights >= 0)
    merged = np.vstack([seg.ground, seg.obstacles])
    assert sorted(map(tuple, merged)) == sorted(map(tuple, cloud))


@given(seed=st.integers(0, 10_000), t1=st.floats(0.01, 2.0), t2=st.floats(0.01, 2.0))
def test_threshold_monotone(seed, t1, t2):
    lo, hi = min(t1, t2), max(t1, t2)
    cloud = random_scene(seed)
    cloth = simulate_cloth(cloud, ClothParams(max_iterations=200))
    g_lo = {tuple(p) for p in classify(cloud, cloth, lo).ground}
    g_hi = {tuple(p) for p in classify(cloud, cloth, hi).ground}
    assert g_lo <= g_hi


@given(seed=st.integers(0, 10_000), rigidness=st.sampled_from([1, 2, 3]))
def test_cloth_never_above_lowest_point_of_constrained_node(seed, rigidness):
    cloud = random_scene(seed)
    p = ClothParams(rigidness=rigidness, max_iterations=200)
    cloth = simulate_cloth(cloud, p)
    j = np.rint((cloud[:, 0] - cloth.x0) / p.cell_size).astype(int)
    i = np.rint((cloud[:, 1] - cloth.y0) / p.cell_size).astype(int)
    lowest = np.full(cloth.heights.shape, np.inf)
    np.minimum.at(lowest, (i, j), cloud[:, 2])
    has = np.isfinite(lowest)
    assert np.all(cloth.heights[has] <= lowest[has] + 1e-6)


def test_lattice_covers_cloud_with_margin():
    cloud = random_scene(3)
    cloth = simulate_cloth(cloud)
    ny, nx = cloth.heights.shape
    assert cloth.x0 <= cloud[:, 0].min() - cloth.cell_size + 1e-12
    assert cloth.y0 <= cloud[:, 1].min() - cloth.cell_size + 1e-12
    assert cloth.x0 + (nx - 1) * cloth.cell_size >= cloud[:, 0].max() + cloth.cell_size - 1e-12
    assert cloth.y0 + (ny - 1) * cloth.cell_size >= cloud[:, 1].max() + cloth.cell_size - 1e-12


def test_segmentation_is_deterministic():
    cloud = random_scene(11)
    a, b = segment(cloud), segment(cloud.copy())
    assert a.ground.tobytes() == b.ground.tobytes()
    assert a.heights.tobytes() == b.heights.tobytes()


def test_pure_backend_matches_selected_backend():
    cloud = random_scene(5)
    p = ClothParams(rigidness=2)
    cloth = simulate_cloth(cloud, p)
    ny, nx = cloth.heights.shape
    # rebuild the kernel inputs the same way and run the pure implementation
    j = np.rint((cloud[:, 0] - cloth.x0) / p.cell_size).astype(np.int64)
    i = np.rint((cloud[:, 1] - cloth.y0) / p.cell_size).astype(np.int64)
    c = np.full(ny * nx, -np.inf)
    np.maximum.at(c, i * nx + j, -cloud[:, 2])
    has = np.isfinite(c)
    c = np.where(has, c, 0.0).reshape(ny, nx)
    start = np.full((ny, nx), -cloud[:, 2].min() + p.gravity_displacement)
    z, pinned, it = _pykernels.cloth_relax(start, c, has.reshape(ny, nx), p.gravity_displacement, p.rigidness,
                                           p.max_iterations, p.convergence_eps)
    np.testing.assert_allclose(-z, cloth.heights, atol=1e-12)
    assert it == cloth.iterations

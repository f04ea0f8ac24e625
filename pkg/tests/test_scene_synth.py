"""Scene generator and sensor simulation tests.

The heavier checks here are the cross-sensor consistency sweep (lidar
returns must agree with rendered pixel classes) and the occupancy bounds
over many seeds; everything else is small hand-built worlds with known
geometry.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msocc.geometry import (
    CalibrationSet,
    CameraModel,
    VoxelGridSpec,
    compose_extrinsic,
    project_point,
    project_points,
    voxel_indices,
)
from msocc.scene_synth import (
    CLASS_NAMES,
    DEFAULT_PALETTE,
    SKY_COLOR,
    VOID_LABEL,
    BeamPattern,
    PointCloud,
    SemanticWorld,
    camera_position,
    cast_rays,
    default_sensor_origin,
    generate_world,
    load_label_grid,
    load_pointcloud,
    load_ppm,
    make_beam_pattern,
    make_surround_rig,
    raycast_lidar,
    render_views,
    save_label_grid,
    save_pointcloud,
    save_ppm,
    shade_factor,
)

DESK_SPEC = VoxelGridSpec(origin=(-6.4, -6.4, 0.0), resolution=0.2, dims=(16, 64, 64))

CLASS_GROUND = CLASS_NAMES.index("ground")
CLASS_VEHICLE = CLASS_NAMES.index("vehicle")


def empty_world(spec=DESK_SPEC):
    return SemanticWorld(grid=np.zeros(spec.dims, np.uint8), spec=spec)


def single_voxel_world(spec=DESK_SPEC, vox=(8, 32, 42), label=CLASS_VEHICLE):
    grid = np.zeros(spec.dims, np.uint8)
    grid[vox] = label
    return SemanticWorld(grid=grid, spec=spec)


def single_beam(azimuth=0.0, elevation=0.0):
    return BeamPattern(
        elevations=np.array([elevation]), azimuths=np.array([azimuth])
    )


# ---------------------------------------------------------------------------
# World generation


def test_generate_world_deterministic():
    a = generate_world(11, DESK_SPEC)
    b = generate_world(11, DESK_SPEC)
    assert np.array_equal(a.grid, b.grid)
    c = generate_world(12, DESK_SPEC)
    assert not np.array_equal(a.grid, c.grid)


def test_ground_layer_complete():
    for seed in range(5):
        w = generate_world(seed, DESK_SPEC)
        assert (w.grid[0] == CLASS_GROUND).all()


def test_generated_labels_in_range():
    for seed in range(5):
        w = generate_world(seed, DESK_SPEC)
        assert w.grid.max() < w.class_count
        assert not (w.grid == VOID_LABEL).any()


def test_occupancy_fraction_bounds():
    fracs = [generate_world(seed, DESK_SPEC).occupancy_fraction for seed in range(100)]
    assert min(fracs) >= 0.05
    assert max(fracs) <= 0.40


def test_generate_world_dims_too_small():
    with pytest.raises(ValueError, match="too small"):
        generate_world(0, VoxelGridSpec(origin=(0, 0, 0), resolution=0.2, dims=(4, 64, 64)))
    with pytest.raises(ValueError, match="too small"):
        generate_world(0, VoxelGridSpec(origin=(0, 0, 0), resolution=0.2, dims=(16, 8, 64)))


def test_generate_world_reduced_classes():
    w = generate_world(4, DESK_SPEC, class_count=3)
    assert set(np.unique(w.grid)) <= {0, 1, 2}
    assert w.palette.shape == (3, 3)


def test_generate_world_bad_class_count():
    with pytest.raises(ValueError, match="class_count"):
        generate_world(0, DESK_SPEC, class_count=1)


def test_semantic_world_rejects_out_of_range_label():
    grid = np.zeros(DESK_SPEC.dims, np.uint8)
    grid[3, 3, 3] = 9
    with pytest.raises(ValueError, match="class_count"):
        SemanticWorld(grid=grid, spec=DESK_SPEC)


def test_semantic_world_accepts_void():
    grid = np.zeros(DESK_SPEC.dims, np.uint8)
    grid[3, 3, 3] = VOID_LABEL
    w = SemanticWorld(grid=grid, spec=DESK_SPEC)
    assert w.occupancy_fraction == 0.0


# ---------------------------------------------------------------------------
# Lidar


def test_default_sensor_origin_is_voxel_center():
    o = default_sensor_origin(DESK_SPEC)
    assert np.allclose(o, [0.1, 0.1, 1.7])


def test_beam_pattern_directions():
    pat = make_beam_pattern(n_elevation=4, n_azimuth=8)
    dirs = pat.directions()
    assert dirs.shape == (32, 3)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)


def test_lidar_empty_world_returns_nothing():
    pc = raycast_lidar(empty_world(), seed=0)
    assert len(pc) == 0


def test_lidar_single_voxel_known_range():
    # Occupied voxel straight ahead (+x) of the sensor at (0.1, 0.1, 1.7):
    # x index 42 spans [2.0, 2.2) meters, so the entry face is 1.9 m out.
    w = single_voxel_world()
    pc = raycast_lidar(w, pattern=single_beam(), noise_sigma=0.0, seed=0)
    assert len(pc) == 1
    assert abs(pc.ranges[0] - 1.9) <= DESK_SPEC.resolution
    assert pc.ranges[0] == pytest.approx(1.901, abs=1e-6)  # entry face + inset
    idx, valid = voxel_indices(pc.points.astype(np.float64), DESK_SPEC)
    assert valid[0]
    assert tuple(idx[0]) == (8, 32, 42)


def test_lidar_miss_produces_no_return():
    w = single_voxel_world()
    pc = raycast_lidar(w, pattern=single_beam(azimuth=math.pi), noise_sigma=0.0)
    assert len(pc) == 0


def test_lidar_returns_inside_nonfree_voxels():
    for seed in range(5):
        w = generate_world(seed, DESK_SPEC)
        pc = raycast_lidar(w, seed=seed)
        idx, valid = voxel_indices(pc.points.astype(np.float64), DESK_SPEC)
        assert valid.all()
        cls = w.grid[idx[:, 0], idx[:, 1], idx[:, 2]]
        assert (cls != 0).all()


def test_lidar_range_cap():
    w = generate_world(1, DESK_SPEC)
    near = raycast_lidar(w, max_range=3.0, seed=1)
    far = raycast_lidar(w, max_range=20.0, seed=1)
    assert len(near) < len(far)
    assert (near.ranges <= 3.0).all()


def test_lidar_noise_reproducible():
    w = generate_world(2, DESK_SPEC)
    a = raycast_lidar(w, seed=5)
    b = raycast_lidar(w, seed=5)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.ranges, b.ranges)
    c = raycast_lidar(w, seed=6)
    assert not np.array_equal(a.points, c.points)


def test_lidar_noise_spread():
    # With a nonzero sigma the same beam fired at many noise seeds should
    # spread around the surface but stay inside the voxel.
    w = single_voxel_world()
    ranges = [
        raycast_lidar(w, pattern=single_beam(), noise_sigma=0.02, seed=s).ranges[0]
        for s in range(200)
    ]
    ranges = np.array(ranges)
    assert ranges.std() > 0.005
    assert (ranges >= 1.901 - 1e-6).all()
    assert (ranges <= 2.1).all()


def test_lidar_origin_outside_grid_rejected():
    with pytest.raises(ValueError, match="outside grid"):
        raycast_lidar(empty_world(), origin=np.array([100.0, 0.0, 1.0]))


# ---------------------------------------------------------------------------
# General ray caster


def test_cast_rays_from_outside_grid():
    w = single_voxel_world()  # voxel x in [2.0, 2.2)
    origins = np.array([[-10.0, 0.1, 1.7]])
    dirs = np.array([[1.0, 0.0, 0.0]])
    t, vox, cls = cast_rays(
        w.grid, origins, dirs, np.array(DESK_SPEC.origin), DESK_SPEC.resolution, 50.0
    )
    assert t[0] == pytest.approx(12.0, abs=1e-9)
    assert tuple(vox[0]) == (8, 32, 42)
    assert cls[0] == CLASS_VEHICLE


def test_cast_rays_descending_from_above():
    w = generate_world(0, DESK_SPEC)
    origins = np.array([[0.1, 0.1, 5.0]])  # above the 3.2 m grid top
    dirs = np.array([[0.0, 0.0, -1.0]])
    t, vox, cls = cast_rays(
        w.grid, origins, dirs, np.array(DESK_SPEC.origin), DESK_SPEC.resolution, 50.0
    )
    # The ego column is clear, so the first hit is the ground layer, whose
    # top face sits at z = 0.2.
    assert cls[0] == CLASS_GROUND
    assert t[0] == pytest.approx(4.8, abs=1e-9)


def test_cast_rays_miss():
    w = single_voxel_world()
    origins = np.array([[0.1, 0.1, 1.7], [100.0, 100.0, 100.0]])
    dirs = np.array([[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    t, vox, cls = cast_rays(
        w.grid, origins, dirs, np.array(DESK_SPEC.origin), DESK_SPEC.resolution, 50.0
    )
    assert t[0] == -1.0 and t[1] == -1.0
    assert (vox == -1).all()


def test_cast_rays_matches_kernel_inside_grid():
    from msocc._kernels import raycast as kernel_raycast

    w = generate_world(3, DESK_SPEC)
    origin = default_sensor_origin(DESK_SPEC)
    rng = np.random.default_rng(0)
    dirs = rng.normal(size=(500, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    lo = np.array(DESK_SPEC.origin)
    t1, v1, c1 = kernel_raycast(w.grid, origin, dirs, lo, DESK_SPEC.resolution, 20.0)
    t2, v2, c2 = cast_rays(w.grid, origin, dirs, lo, DESK_SPEC.resolution, 20.0)
    assert np.allclose(t1, t2, atol=1e-9)
    assert np.array_equal(v1, v2)
    assert np.array_equal(c1, c2)


# ---------------------------------------------------------------------------
# Camera rig and rendering


def test_surround_rig_geometry():
    rig = make_surround_rig(DESK_SPEC)
    assert len(rig) == 4
    mount = default_sensor_origin(DESK_SPEC)
    expected_fx = 64.0 / math.tan(math.radians(50.0))
    forwards = []
    for cam in rig:
        assert np.allclose(camera_position(cam), mount)
        assert cam.fx == pytest.approx(expected_fx)
        assert cam.width == 128 and cam.height == 96
        forwards.append(cam.extrinsic[2, :3])
    assert np.allclose(forwards[0], [1, 0, 0])
    assert np.allclose(forwards[1], [0, 1, 0])
    assert np.allclose(forwards[2], [-1, 0, 0])
    assert np.allclose(forwards[3], [0, -1, 0])


def test_render_empty_world_is_sky():
    views = render_views(empty_world(), make_surround_rig(DESK_SPEC))
    assert len(views) == 4
    for img, cmap, dmap in zip(views.images, views.class_maps, views.depth_maps):
        assert (img == SKY_COLOR).all()
        assert (cmap == VOID_LABEL).all()
        assert np.isinf(dmap).all()


def test_render_known_voxel_class_and_color():
    w = single_voxel_world()  # vehicle voxel centered at (2.1, 0.1, 1.7)
    rig = make_surround_rig(DESK_SPEC)
    front = rig[0]
    uvz = project_point(np.array([2.1, 0.1, 1.7]), front)
    assert uvz is not None
    u, v, _ = uvz
    px, py = int(u), int(v)
    views = render_views(w, rig)
    assert views.class_maps[0][py, px] == CLASS_VEHICLE
    depth = views.depth_maps[0][py, px]
    assert depth == pytest.approx(1.9, abs=0.01)
    expected = np.rint(
        DEFAULT_PALETTE[CLASS_VEHICLE].astype(np.float64) * shade_factor(depth)
    ).astype(np.uint8)
    assert np.array_equal(views.images[0][py, px], expected)
    # The other cameras look away from the voxel and see only sky.
    assert (views.class_maps[2] == VOID_LABEL).all()


def test_render_depth_shading_darkens_with_distance():
    near = single_voxel_world(vox=(8, 32, 42))  # 1.9 m ahead
    far = single_voxel_world(vox=(8, 32, 62))  # 5.9 m ahead
    rig = make_surround_rig(DESK_SPEC)
    v_near = render_views(near, rig).images[0]
    v_far = render_views(far, rig).images[0]
    cy, cx = 48, 64
    assert v_near[cy, cx].astype(int).sum() > v_far[cy, cx].astype(int).sum()


def test_render_camera_outside_grid():
    # A slab at x in [2.0, 2.2) seen by a camera 10 m outside the grid; a
    # single voxel would be below this camera's pixel resolution.
    spec = DESK_SPEC
    grid = np.zeros(spec.dims, np.uint8)
    grid[6:12, 28:37, 42] = CLASS_VEHICLE
    w = SemanticWorld(grid=grid, spec=spec)
    fx = 64.0 / math.tan(math.radians(50.0))
    R = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
    pos = np.array([-10.0, 0.1, 1.7])
    cam = CameraModel(
        fx=fx, fy=fx, cx=64.0, cy=48.0,
        extrinsic=compose_extrinsic(R, -R @ pos), width=128, height=96,
    )
    views = render_views(w, CalibrationSet(cameras=(cam,)))
    cmap = views.class_maps[0]
    assert (cmap == CLASS_VEHICLE).any()
    assert views.depth_maps[0][cmap == CLASS_VEHICLE].min() == pytest.approx(12.0, abs=0.05)


def test_render_deterministic():
    w = generate_world(7, DESK_SPEC)
    rig = make_surround_rig(DESK_SPEC)
    a = render_views(w, rig)
    b = render_views(w, rig)
    for ia, ib in zip(a.images, b.images):
        assert np.array_equal(ia, ib)


def test_shade_factor_bounds():
    assert shade_factor(np.array(0.0)) == 1.0
    assert shade_factor(np.array(100.0)) == pytest.approx(0.3)
    d = np.linspace(0, 30, 50)
    s = shade_factor(d)
    assert (np.diff(s) <= 0).all()


# ---------------------------------------------------------------------------
# Cross-sensor consistency


def _uniform_class_map(cmap):
    """Pixels whose 3x3 neighborhood all shows the same class."""
    uni = np.ones(cmap.shape, bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            uni &= np.roll(np.roll(cmap, dy, axis=0), dx, axis=1) == cmap
    uni[0, :] = uni[-1, :] = False
    uni[:, 0] = uni[:, -1] = False
    return uni


def test_lidar_camera_class_consistency():
    """Lidar returns projected into a camera that sees them must land on
    pixels rendered with the same class.

    Checked on 20 scenes.  Pixel rays are quantized to pixel centers, so
    points at object silhouettes can project onto a pixel dominated by the
    surface behind or in front; away from rendered class boundaries the
    agreement must be near-perfect, and overall it must stay high.
    """
    spec = DESK_SPEC
    lo = np.array(spec.origin)
    rig = make_surround_rig(spec)
    checked = agreed = 0
    interior_checked = interior_agreed = 0
    for seed in range(20):
        w = generate_world(seed, spec)
        pc = raycast_lidar(w, seed=seed)
        views = render_views(w, rig)
        pts = pc.points.astype(np.float64)
        idx, valid = voxel_indices(pts, spec)
        assert valid.all()
        pcls = w.grid[idx[:, 0], idx[:, 1], idx[:, 2]]
        for ci, cam in enumerate(rig):
            uv, _, in_view = project_points(pts, cam)
            sel = np.where(in_view)[0]
            if sel.size == 0:
                continue
            pos = camera_position(cam)
            vec = pts[sel] - pos[None, :]
            dist = np.linalg.norm(vec, axis=1)
            dirs = vec / dist[:, None]
            _, vox, _ = cast_rays(w.grid, pos, dirs, lo, spec.resolution, 25.0)
            unoccluded = (vox == idx[sel]).all(axis=1)
            px = np.floor(uv[sel]).astype(int)
            cmap = views.class_maps[ci]
            rendered = cmap[px[:, 1], px[:, 0]]
            agree = (rendered == pcls[sel]) & unoccluded
            checked += int(unoccluded.sum())
            agreed += int(agree.sum())
            interior = _uniform_class_map(cmap)[px[:, 1], px[:, 0]] & unoccluded
            interior_checked += int(interior.sum())
            interior_agreed += int((agree & interior).sum())
    assert checked > 100_000
    assert agreed / checked >= 0.97
    assert interior_agreed / interior_checked >= 0.999


# ---------------------------------------------------------------------------
# File formats


def test_pointcloud_round_trip(tmp_path):
    w = generate_world(0, DESK_SPEC)
    origin = default_sensor_origin(DESK_SPEC)
    pc = raycast_lidar(w, origin=origin, seed=0)
    path = tmp_path / "scan.mspc"
    save_pointcloud(path, pc)
    back = load_pointcloud(path, origin)
    assert np.array_equal(
        pc.points.view(np.uint8), back.points.view(np.uint8)
    )
    assert np.allclose(back.ranges, pc.ranges, atol=1e-5)


def test_pointcloud_file_layout(tmp_path):
    pts = np.array([[1.0, 2.0, 3.0], [-1.5, 0.25, 8.0]], np.float32)
    pc = PointCloud(points=pts, ranges=np.linalg.norm(pts, axis=1).astype(np.float32))
    path = tmp_path / "two.mspc"
    save_pointcloud(path, pc)
    raw = path.read_bytes()
    assert raw[:4] == b"MSPC"
    assert int.from_bytes(raw[4:8], "little") == 2
    assert len(raw) == 8 + 2 * 12
    assert np.frombuffer(raw, "<f4", count=3, offset=8).tolist() == [1.0, 2.0, 3.0]


def test_pointcloud_bad_magic(tmp_path):
    path = tmp_path / "bad.mspc"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        load_pointcloud(path, np.zeros(3))


def test_pointcloud_truncated(tmp_path):
    path = tmp_path / "short.mspc"
    path.write_bytes(b"MSPC" + (5).to_bytes(4, "little") + b"\x00" * 8)
    with pytest.raises(ValueError, match="bytes"):
        load_pointcloud(path, np.zeros(3))


def test_label_grid_round_trip(tmp_path):
    w = generate_world(1, DESK_SPEC)
    path = tmp_path / "labels.msog"
    save_label_grid(path, w.grid, w.class_count)
    grid, count = load_label_grid(path)
    assert count == w.class_count
    assert np.array_equal(grid, w.grid)


def test_label_grid_file_layout(tmp_path):
    grid = np.zeros((2, 3, 4), np.uint8)
    grid[1, 2, 3] = 5
    path = tmp_path / "tiny.msog"
    save_label_grid(path, grid, 7)
    raw = path.read_bytes()
    assert raw[:4] == b"MSOG"
    assert int.from_bytes(raw[4:8], "little") == 2
    assert int.from_bytes(raw[8:12], "little") == 3
    assert int.from_bytes(raw[12:16], "little") == 4
    assert raw[16] == 7
    assert len(raw) == 17 + 24
    # z-major: voxel (z, y, x) lives at offset z*H*W + y*W + x.
    assert raw[17 + 1 * 12 + 2 * 4 + 3] == 5


def test_label_grid_bad_magic(tmp_path):
    path = tmp_path / "bad.msog"
    path.write_bytes(b"XXXX" + b"\x00" * 20)
    with pytest.raises(ValueError, match="magic"):
        load_label_grid(path)


@settings(max_examples=25, deadline=None)
@given(
    d=st.integers(1, 4), h=st.integers(1, 5), w=st.integers(1, 5),
    seed=st.integers(0, 2**31),
)
def test_label_grid_round_trip_property(tmp_path_factory, d, h, w, seed):
    rng = np.random.default_rng(seed)
    grid = rng.integers(0, 7, size=(d, h, w), dtype=np.uint8)
    path = tmp_path_factory.mktemp("grids") / "g.msog"
    save_label_grid(path, grid, 7)
    back, count = load_label_grid(path)
    assert count == 7 and np.array_equal(back, grid)


def test_ppm_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(96, 128, 3), dtype=np.uint8)
    path = tmp_path / "img.ppm"
    save_ppm(path, img)
    assert path.read_bytes()[:15] == b"P6\n128 96\n255\n" + img[0, 0, 0:1].tobytes()
    assert np.array_equal(load_ppm(path), img)


def test_ppm_with_comment(tmp_path):
    img = np.arange(12, dtype=np.uint8).reshape(2, 2, 3)
    path = tmp_path / "c.ppm"
    path.write_bytes(b"P6\n# a comment\n2 2\n255\n" + img.tobytes())
    assert np.array_equal(load_ppm(path), img)


def test_ppm_rejects_wide_maxval(tmp_path):
    path = tmp_path / "w.ppm"
    path.write_bytes(b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00")
    with pytest.raises(ValueError, match="maxval"):
        load_ppm(path)


def test_rendered_scene_images_round_trip(tmp_path):
    w = generate_world(5, DESK_SPEC)
    views = render_views(w, make_surround_rig(DESK_SPEC))
    for i, img in enumerate(views.images):
        p = tmp_path / f"cam{i}.ppm"
        save_ppm(p, img)
        assert np.array_equal(load_ppm(p), img)

"""Tests for camera projection, voxel indexing, and calibration files."""

import numpy as np
import pytest

from msocc.geometry import (
    CalibrationSet,
    CameraModel,
    VoxelGridSpec,
    compose_extrinsic,
    load_calibration,
    project_point,
    project_points,
    save_calibration,
    visible_views,
    voxel_center,
    voxel_centers,
    voxel_index,
    voxel_indices,
)


def unit_cam(fx=1.0, fy=1.0, cx=0.0, cy=0.0, width=128, height=128, extrinsic=None):
    if extrinsic is None:
        extrinsic = np.eye(4)
    return CameraModel(fx=fx, fy=fy, cx=cx, cy=cy, extrinsic=extrinsic,
                       width=width, height=height)


def facing_camera(direction, width=128, height=96, fx=80.0, position=(0.0, 0.0, 0.0)):
    """Camera at `position` looking along a horizontal ego direction, +y down."""
    cam_z = np.asarray(direction, dtype=np.float64)
    cam_z /= np.linalg.norm(cam_z)
    cam_y = np.array([0.0, 0.0, -1.0])
    cam_x = np.cross(cam_y, cam_z)
    r = np.stack([cam_x, cam_y, cam_z])
    t = -r @ np.asarray(position, dtype=np.float64)
    return CameraModel(fx=fx, fy=fx, cx=width / 2, cy=height / 2,
                       extrinsic=compose_extrinsic(r, t), width=width, height=height)


def random_rotation(rng):
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# ---------------------------------------------------------------------------
# projection


def test_project_on_optical_axis():
    out = project_point((0.0, 0.0, 1.0), unit_cam())
    assert out is not None
    u, v, depth = out
    assert (u, v) == (0.0, 0.0)
    assert depth == pytest.approx(1.0)


def test_project_behind_camera_absent():
    assert project_point((0.0, 0.0, -1.0), unit_cam()) is None


def test_project_hand_evaluated_pinhole():
    cam = unit_cam(fx=100.0, fy=100.0, cx=64.0, cy=64.0)
    u, v, depth = project_point((1.0, 0.0, 2.0), cam)
    assert u == pytest.approx(114.0)
    assert v == pytest.approx(64.0)
    assert depth == pytest.approx(2.0)


def test_project_image_bounds_are_half_open():
    cam = unit_cam(fx=10.0, fy=10.0, cx=64.0, cy=64.0, width=128, height=128)
    # u lands exactly on the right edge: (128-64)/10 * z at z=1
    assert project_point((6.4, 0.0, 1.0), cam) is None
    assert project_point((6.39, 0.0, 1.0), cam) is not None


def test_project_points_matches_scalar():
    rng = np.random.default_rng(0)
    cam = CameraModel(fx=90.0, fy=85.0, cx=60.0, cy=50.0,
                      extrinsic=compose_extrinsic(random_rotation(rng), rng.uniform(-1, 1, 3)),
                      width=120, height=100)
    pts = rng.uniform(-4, 4, (500, 3))
    uv, depth, valid = project_points(pts, cam)
    for i, p in enumerate(pts):
        single = project_point(p, cam)
        if single is None:
            assert not valid[i]
        else:
            assert valid[i]
            assert np.allclose(uv[i], single[:2], atol=1e-9)
            assert depth[i] == pytest.approx(single[2])


def test_back_projection_recovers_point():
    rng = np.random.default_rng(1)
    for _ in range(20):
        cam = CameraModel(fx=rng.uniform(50, 150), fy=rng.uniform(50, 150),
                          cx=64.0, cy=48.0,
                          extrinsic=compose_extrinsic(random_rotation(rng),
                                                      rng.uniform(-2, 2, 3)),
                          width=128, height=96)
        p = rng.uniform(-5, 5, 3)
        out = project_point(p, cam)
        if out is None:
            continue
        u, v, depth = out
        pc = np.array([(u - cam.cx) / cam.fx * depth,
                       (v - cam.cy) / cam.fy * depth,
                       depth])
        r = cam.extrinsic[:3, :3]
        t = cam.extrinsic[:3, 3]
        back = r.T @ (pc - t)
        assert np.abs(back - p).max() < 1e-4


# ---------------------------------------------------------------------------
# voxel grid


def test_voxel_index_at_origin_corner():
    spec = VoxelGridSpec(origin=(0.0, 0.0, 0.0), resolution=0.2, dims=(4, 8, 8))
    assert voxel_index((0.0, 0.0, 0.0), spec) == (0, 0, 0)


def test_voxel_index_hand_arithmetic():
    spec = VoxelGridSpec(origin=(-6.4, -6.4, 0.0), resolution=0.2, dims=(16, 64, 64))
    idx = voxel_index((0.0, 0.0, 0.1), spec)
    assert idx == (0, 32, 32)  # (z, y, x)


def test_voxel_index_beyond_max_corner_absent():
    spec = VoxelGridSpec(origin=(0.0, 0.0, 0.0), resolution=0.5, dims=(2, 2, 2))
    # half a resolution past the max corner on x
    assert voxel_index((1.25, 0.5, 0.5), spec) is None


def test_voxel_index_max_corner_is_out():
    spec = VoxelGridSpec(origin=(0.0, 0.0, 0.0), resolution=0.5, dims=(2, 2, 2))
    assert voxel_index((1.0, 1.0, 1.0), spec) is None
    assert voxel_index((0.999, 0.999, 0.999), spec) == (1, 1, 1)


def test_voxel_center_first_cell():
    spec = VoxelGridSpec(origin=(0.0, 0.0, 0.0), resolution=0.2, dims=(4, 4, 4))
    assert voxel_center((0, 0, 0), spec) == pytest.approx((0.1, 0.1, 0.1))


def test_voxel_center_axis_order():
    spec = VoxelGridSpec(origin=(0.0, 0.0, 0.0), resolution=1.0, dims=(8, 8, 8))
    # index (z=2, y=3, x=4) -> ego (x, y, z)
    assert voxel_center((2, 3, 4), spec) == pytest.approx((4.5, 3.5, 2.5))


def test_voxel_center_out_of_range_raises():
    spec = VoxelGridSpec(origin=(0.0, 0.0, 0.0), resolution=1.0, dims=(2, 2, 2))
    with pytest.raises(IndexError):
        voxel_center((2, 0, 0), spec)


def test_voxel_round_trip_displacement():
    spec = VoxelGridSpec(origin=(-6.4, -6.4, 0.0), resolution=0.2, dims=(16, 64, 64))
    rng = np.random.default_rng(2)
    lo = np.array(spec.origin)
    hi = np.array(spec.max_corner) - 1e-9
    pts = rng.uniform(lo, hi, (10_000, 3))
    half = spec.resolution / 2 + 1e-6
    for p in pts[:100]:  # scalar path
        c = np.array(voxel_center(voxel_index(p, spec), spec))
        assert np.abs(c - p).max() < half
    idx, valid = voxel_indices(pts, spec)  # batch path on all of them
    assert valid.all()
    centers = voxel_centers(idx, spec)
    assert np.abs(centers - pts).max() < half


def test_voxel_index_batch_matches_scalar():
    spec = VoxelGridSpec(origin=(-1.0, -1.0, 0.0), resolution=0.3, dims=(3, 5, 7))
    rng = np.random.default_rng(3)
    pts = rng.uniform(-2, 2, (400, 3))
    idx, valid = voxel_indices(pts, spec)
    for i, p in enumerate(pts):
        single = voxel_index(p, spec)
        if single is None:
            assert not valid[i]
        else:
            assert valid[i]
            assert tuple(idx[i]) == single


# ---------------------------------------------------------------------------
# visibility


def test_visible_views_empty_behind_all():
    calib = CalibrationSet(cameras=(facing_camera((1, 0, 0)),))
    assert visible_views((-3.0, 0.0, 0.0), calib) == set()


def test_visible_views_single_forward():
    calib = CalibrationSet(cameras=(facing_camera((1, 0, 0)),))
    assert visible_views((2.0, 0.0, 0.0), calib) == {0}


def test_visible_views_four_camera_rig():
    calib = CalibrationSet(cameras=(
        facing_camera((1, 0, 0)),
        facing_camera((0, 1, 0)),
        facing_camera((-1, 0, 0)),
        facing_camera((0, -1, 0)),
    ))
    assert visible_views((2.0, 0.0, 0.0), calib) == {0}
    assert visible_views((0.0, 2.0, 0.0), calib) == {1}
    assert visible_views((-2.0, 0.0, 0.0), calib) == {2}
    assert visible_views((0.0, -2.0, 0.0), calib) == {3}


def test_visible_views_matches_batch_projector():
    rng = np.random.default_rng(4)
    calib = CalibrationSet(cameras=(
        facing_camera((1, 0, 0)),
        facing_camera((0, 1, 0)),
        facing_camera((-1, 1, 0)),
    ))
    pts = rng.uniform(-4, 4, (200, 3))
    per_cam = [project_points(pts, cam)[2] for cam in calib]
    for i, p in enumerate(pts):
        expected = {j for j in range(len(calib)) if per_cam[j][i]}
        assert visible_views(p, calib) == expected


# ---------------------------------------------------------------------------
# validation


def test_camera_rejects_skewed_rotation():
    ext = np.eye(4)
    ext[0, 1] = 0.01
    with pytest.raises(ValueError, match="orthonormal"):
        unit_cam(extrinsic=ext)


def test_camera_rejects_reflection():
    ext = np.eye(4)
    ext[0, 0] = -1.0  # orthonormal but det = -1
    with pytest.raises(ValueError, match="determinant"):
        unit_cam(extrinsic=ext)


def test_camera_rejects_bad_focal():
    with pytest.raises(ValueError, match="focal"):
        unit_cam(fx=0.0)


def test_grid_spec_rejects_bad_resolution():
    with pytest.raises(ValueError, match="resolution"):
        VoxelGridSpec(origin=(0, 0, 0), resolution=0.0, dims=(2, 2, 2))


def test_grid_spec_rejects_empty_dims():
    with pytest.raises(ValueError, match="dims"):
        VoxelGridSpec(origin=(0, 0, 0), resolution=0.1, dims=(0, 2, 2))


def test_calibration_set_needs_a_camera():
    with pytest.raises(ValueError, match="at least one"):
        CalibrationSet(cameras=())


# ---------------------------------------------------------------------------
# calibration files


def rig_for_io():
    return CalibrationSet(cameras=(
        facing_camera((1, 0, 0), position=(0.05, 0.0, 0.3)),
        facing_camera((0, 1, 0), position=(0.0, 0.05, 0.3)),
    ))


def test_calibration_round_trip(tmp_path):
    calib = rig_for_io()
    path = tmp_path / "cams.txt"
    save_calibration(calib, path)
    loaded = load_calibration(path)
    assert len(loaded) == len(calib)
    for a, b in zip(calib, loaded):
        assert (a.fx, a.fy, a.cx, a.cy) == (b.fx, b.fy, b.cx, b.cy)
        assert (a.width, a.height) == (b.width, b.height)
        assert np.array_equal(a.extrinsic, b.extrinsic)


def test_calibration_rejects_unknown_key(tmp_path):
    path = tmp_path / "cams.txt"
    save_calibration(rig_for_io(), path)
    path.write_text(path.read_text() + "skew 0.1\n")
    with pytest.raises(ValueError, match="unknown key"):
        load_calibration(path)


def test_calibration_rejects_missing_key(tmp_path):
    path = tmp_path / "cams.txt"
    text = "fx 80.0\nfy 80.0\ncx 64.0\ncy 48.0\nwidth 128\nheight 96\n"
    path.write_text(text)  # no extrinsic line
    with pytest.raises(ValueError, match="missing"):
        load_calibration(path)


def test_calibration_rejects_short_extrinsic(tmp_path):
    path = tmp_path / "cams.txt"
    vals = " ".join(["1"] + ["0"] * 10)  # 11 numbers
    path.write_text(f"fx 80\nfy 80\ncx 64\ncy 48\nwidth 128\nheight 96\nextrinsic {vals}\n")
    with pytest.raises(ValueError, match="12 values"):
        load_calibration(path)


def test_calibration_rejects_invalid_rotation(tmp_path):
    path = tmp_path / "cams.txt"
    vals = "1 0 0 0  0 2 0 0  0 0 1 0"  # scaled row: not orthonormal
    path.write_text(f"fx 80\nfy 80\ncx 64\ncy 48\nwidth 128\nheight 96\nextrinsic {vals}\n")
    with pytest.raises(ValueError, match="orthonormal"):
        load_calibration(path)


def test_calibration_skips_comments(tmp_path):
    path = tmp_path / "cams.txt"
    save_calibration(rig_for_io(), path)
    path.write_text("# rig calibration\n" + path.read_text())
    assert len(load_calibration(path)) == 2

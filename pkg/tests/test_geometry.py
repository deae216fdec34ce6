import json
import math

import numpy as np
import numpy.testing as npt
import pytest

from mvtrack3d.errors import BehindCamera, OffsetOutOfRange
from mvtrack3d.geometry import (
    CameraModel,
    KeypointKind,
    ObjectState3D,
    backproject_point,
    box_corners,
    camera_looking_at,
    generate_keypoints,
    load_camera_network,
    motion_compensate,
    normalize_yaw,
    project_point,
    save_camera_network,
)

import oracles


def simple_cam(width=100, height=100):
    return CameraModel(
        focal_x=100.0,
        focal_y=100.0,
        principal_x=50.0,
        principal_y=50.0,
        rotation=np.eye(3),
        translation=np.zeros(3),
        width=width,
        height=height,
    )


def test_project_principal_ray():
    u, v, d = project_point(simple_cam(), [0.0, 0.0, 10.0])
    assert (u, v, d) == (50.0, 50.0, 10.0)


def test_project_offset_point():
    u, v, d = project_point(simple_cam(), [1.0, 0.0, 10.0])
    assert (u, v, d) == (60.0, 50.0, 10.0)


def test_project_behind_camera_raises():
    with pytest.raises(BehindCamera):
        project_point(simple_cam(), [0.0, 0.0, -1.0])
    with pytest.raises(BehindCamera):
        project_point(simple_cam(), [0.0, 0.0, 0.0])


def test_project_matches_independent_formula():
    rng = np.random.default_rng(11)
    for _ in range(50):
        cam = camera_looking_at(
            position=rng.uniform(-5, 5, size=3),
            target=rng.uniform(-1, 1, size=3),
            focal=rng.uniform(50, 500),
            principal=(rng.uniform(100, 400), rng.uniform(100, 300)),
            image_size=(640, 480),
        )
        point = rng.uniform(-2, 2, size=3)
        K = (cam.focal_x, cam.focal_y, cam.principal_x, cam.principal_y)
        expected = oracles.project_f64(K, cam.rotation, cam.translation, point)
        if expected is None:
            with pytest.raises(BehindCamera):
                project_point(cam, point)
            continue
        u, v, d = project_point(cam, point)
        npt.assert_allclose([u, v, d], expected, rtol=1e-12)


def test_backproject_roundtrip():
    rng = np.random.default_rng(5)
    cam = camera_looking_at([4.0, -3.0, 2.0], [0.0, 0.0, 1.0], 300.0, (320, 240), (640, 480))
    for _ in range(20):
        point = rng.uniform(-1.5, 1.5, size=3)
        u, v, d = project_point(cam, point)
        npt.assert_allclose(backproject_point(cam, u, v, d), point, atol=1e-9)


def test_camera_position_inverts_transform():
    cam = camera_looking_at([4.0, -3.0, 2.0], [0.0, 0.0, 1.0], 300.0, (320, 240), (640, 480))
    npt.assert_allclose(cam.position, [4.0, -3.0, 2.0], atol=1e-12)
    # the target must land on the principal ray
    u, v, _ = project_point(cam, [0.0, 0.0, 1.0])
    npt.assert_allclose([u, v], [320.0, 240.0], atol=1e-9)


def test_rotation_must_be_orthonormal():
    with pytest.raises(ValueError):
        CameraModel(
            focal_x=100.0,
            focal_y=100.0,
            principal_x=50.0,
            principal_y=50.0,
            rotation=np.eye(3) * 1.5,
            translation=np.zeros(3),
            width=10,
            height=10,
        )


def test_box_corners_unit_cube():
    st = ObjectState3D(x=0, y=0, z=0, w=1, l=1, h=1, yaw=0.0)
    corners = box_corners(st)
    assert corners.shape == (8, 3)
    npt.assert_allclose(sorted(map(tuple, corners)), sorted(map(tuple, oracles.corners_f64(0, 0, 0, 1, 1, 1, 0.0))))
    npt.assert_allclose(np.abs(corners), 0.5)
    # bit convention: corner 0 all-negative, corner 7 all-positive
    npt.assert_allclose(corners[0], [-0.5, -0.5, -0.5])
    npt.assert_allclose(corners[7], [0.5, 0.5, 0.5])


def test_box_corners_yawed_frozen_value():
    # l=2, w=1, h=1 rotated 45deg: the (+l/2, +w/2, +h/2) corner is
    # R(pi/4) @ (1, 0.5) = ((1-0.5)/sqrt2, (1+0.5)/sqrt2) in xy.
    st = ObjectState3D(x=0, y=0, z=0, w=1.0, l=2.0, h=1.0, yaw=math.pi / 4)
    corners = box_corners(st)
    npt.assert_allclose(corners[7], [0.35355339059327373, 1.0606601717798212, 0.5], atol=1e-12)
    npt.assert_allclose(corners, oracles.corners_f64(0, 0, 0, 1.0, 2.0, 1.0, math.pi / 4), atol=1e-12)


def test_box_corners_yaw_quarter_turn_permutes():
    st0 = ObjectState3D(x=1, y=2, z=3, w=1.0, l=2.0, h=0.5, yaw=0.0)
    st1 = ObjectState3D(x=1, y=2, z=3, w=2.0, l=1.0, h=0.5, yaw=math.pi / 2)
    # same physical box: rotating an l x w footprint by 90deg equals
    # swapping l and w, so the corner sets must coincide.
    c0 = sorted(map(tuple, np.round(box_corners(st0), 9)))
    c1 = sorted(map(tuple, np.round(box_corners(st1), 9)))
    npt.assert_allclose(c0, c1, atol=1e-9)


def test_box_corners_random_vs_oracle():
    rng = np.random.default_rng(23)
    for _ in range(100):
        x, y, z = rng.uniform(-10, 10, size=3)
        w, l, h = rng.uniform(0.2, 4.0, size=3)
        yaw = rng.uniform(-math.pi, math.pi)
        st = ObjectState3D(x=x, y=y, z=z, w=w, l=l, h=h, yaw=yaw)
        npt.assert_allclose(box_corners(st), oracles.corners_f64(x, y, z, w, l, h, yaw), atol=1e-9)


def test_normalize_yaw():
    assert normalize_yaw(0.0) == 0.0
    npt.assert_allclose(normalize_yaw(3 * math.pi), -math.pi)
    npt.assert_allclose(normalize_yaw(-3 * math.pi), -math.pi)
    npt.assert_allclose(normalize_yaw(math.pi / 3 + 4 * math.pi), math.pi / 3, atol=1e-12)


def test_keypoints_fixed_face_centers():
    st = ObjectState3D(x=0, y=0, z=0, w=1.0, l=2.0, h=1.0, yaw=0.0)
    kp = generate_keypoints(st)
    assert len(kp) == 7
    assert all(k is KeypointKind.FIXED for k in kp.kinds)
    expected = {
        (0.0, 0.0, 0.0),
        (1.0, 0.0, 0.0),
        (-1.0, 0.0, 0.0),
        (0.0, 0.5, 0.0),
        (0.0, -0.5, 0.0),
        (0.0, 0.0, 0.5),
        (0.0, 0.0, -0.5),
    }
    got = {tuple(np.round(p, 12)) for p in kp.points}
    assert got == expected


def test_keypoints_learned_offset_corner():
    st = ObjectState3D(x=0, y=0, z=0, w=1.0, l=2.0, h=1.0, yaw=0.0)
    kp = generate_keypoints(st, learned_offsets=[[1.0, 1.0, 1.0]])
    assert len(kp) == 8
    assert kp.kinds[-1] is KeypointKind.LEARNED
    npt.assert_allclose(kp.points[-1], [1.0, 0.5, 0.5], atol=1e-12)


def test_keypoints_offset_out_of_range():
    st = ObjectState3D(x=0, y=0, z=0, w=1, l=1, h=1, yaw=0.0)
    with pytest.raises(OffsetOutOfRange):
        generate_keypoints(st, learned_offsets=[[0.0, 1.0001, 0.0]])


def test_keypoints_rotate_with_yaw():
    rng = np.random.default_rng(9)
    offsets = rng.uniform(-1, 1, size=(5, 3))
    st0 = ObjectState3D(x=0, y=0, z=0, w=1.0, l=2.0, h=1.0, yaw=0.0)
    yaw = 0.7
    st1 = ObjectState3D(x=0, y=0, z=0, w=1.0, l=2.0, h=1.0, yaw=yaw)
    base = generate_keypoints(st0, offsets).points
    rot = generate_keypoints(st1, offsets).points
    c, s = math.cos(yaw), math.sin(yaw)
    R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    npt.assert_allclose(rot, base @ R.T, atol=1e-12)


def test_motion_compensate_shifts_all_points():
    st = ObjectState3D(x=0, y=0, z=0, w=1, l=1, h=1, yaw=0.0)
    kp = generate_keypoints(st)
    moved = motion_compensate(kp, [1.0, -2.0, 0.5], 0.2)
    npt.assert_allclose(moved.points, kp.points + np.array([0.2, -0.4, 0.1]), atol=1e-12)
    assert moved.kinds == kp.kinds
    with pytest.raises(ValueError):
        motion_compensate(kp, [0, 0, 0], -0.1)


def test_shifted_state():
    st = ObjectState3D(x=1, y=2, z=3, w=1, l=1, h=1, yaw=0.3, vx=2.0, vy=0.0, vz=-1.0)
    moved = st.shifted(0.5)
    npt.assert_allclose([moved.x, moved.y, moved.z], [2.0, 2.0, 2.5])
    assert moved.yaw == st.yaw and moved.w == st.w


def test_dimensions_must_be_positive():
    with pytest.raises(ValueError):
        ObjectState3D(x=0, y=0, z=0, w=0.0, l=1, h=1, yaw=0.0)


def test_camera_network_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    cams = {}
    for cid in (3, 1, 7):
        cams[cid] = camera_looking_at(
            position=rng.uniform(-8, 8, size=3) + [0, 0, 4],
            target=[0.0, 0.0, 1.0],
            focal=rng.uniform(200, 500),
            principal=(320.0, 240.0),
            image_size=(640, 480),
        )
    path = tmp_path / "net.json"
    save_camera_network(path, cams)
    loaded = load_camera_network(path)
    assert set(loaded) == {1, 3, 7}
    for cid, cam in cams.items():
        got = loaded[cid]
        npt.assert_allclose(got.rotation, cam.rotation, atol=1e-9)
        npt.assert_allclose(got.translation, cam.translation, atol=1e-9)
        assert (got.focal_x, got.focal_y) == (cam.focal_x, cam.focal_y)
        assert (got.width, got.height) == (cam.width, cam.height)


def test_camera_network_rejects_duplicate_ids(tmp_path):
    cam = simple_cam()
    path = tmp_path / "net.json"
    save_camera_network(path, {0: cam})
    doc = json.loads(path.read_text())
    doc.append(dict(doc[0]))
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        load_camera_network(path)

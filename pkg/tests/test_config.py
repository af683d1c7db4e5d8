import numpy as np
import pytest

from nerdf.config import (
    BUILTIN_SCENES,
    builtin_scene,
    dump_toml,
    load_pose_file,
    load_scene_config,
    pose_from_spec,
    resolve_scene,
)
from nerdf.errors import ConfigError

SCENE_TOML = """
[scene]
name = "two"

[[scene.blobs]]
center = [0.0, 0.0, 0.0]
radius = 0.5
peak = 4.0
color = [0.9, 0.2, 0.1]
tint = 0.25

[[scene.blobs]]
center = [0.5, 0.0, 0.5]
radius = 0.4
peak = 3.0

[camera]
width = 32
height = 32
fx = 32.0
fy = 32.0
cx = 16.0
cy = 16.0

[bounds]
t_near = 2.0
t_far = 6.0
scene_radius = 5.0

[view_sampling]
position_jitter = 0.2
orientation_jitter_deg = 2.0

[[train_poses]]
position = [4.0, 1.0, 0.0]
look_at = [0.0, 0.0, 0.0]

[[train_poses]]
position = [0.0, 1.0, 4.0]
look_at = [0.0, 0.0, 0.0]
up = [0.0, 1.0, 0.0]

[[heldout_poses]]
position = [2.8, 1.0, 2.8]
look_at = [0.0, 0.0, 0.0]
"""


class TestBuiltinScenes:
    @pytest.mark.parametrize("name", BUILTIN_SCENES)
    def test_builtins_are_valid(self, name):
        sc = builtin_scene(name)
        assert len(sc.train_poses) >= 8
        assert len(sc.heldout_poses) >= 3
        assert sc.t_far > sc.t_near
        region = sc.pose_region()
        assert len(region.poses) == len(sc.train_poses)

    def test_blob_counts_match_names(self):
        assert len(builtin_scene("sphere").scene.blobs) == 1
        assert len(builtin_scene("triplet").scene.blobs) == 3
        assert len(builtin_scene("occluder").scene.blobs) == 2

    def test_unknown_builtin(self):
        with pytest.raises(ConfigError):
            builtin_scene("teapot")


class TestSceneFile:
    def test_load(self, tmp_path):
        path = tmp_path / "scene.toml"
        path.write_text(SCENE_TOML)
        sc = load_scene_config(path)
        assert sc.name == "two"
        assert len(sc.scene.blobs) == 2
        assert sc.width == 32 and sc.fx == 32.0
        assert len(sc.train_poses) == 2 and len(sc.heldout_poses) == 1
        fwd = sc.train_poses[0].orientation[:, 2]
        np.testing.assert_allclose(fwd, -sc.train_poses[0].position / np.linalg.norm(sc.train_poses[0].position), atol=1e-9)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "scene.toml"
        path.write_text(SCENE_TOML + "\n[extras]\nfoo = 1\n")
        with pytest.raises(ConfigError):
            load_scene_config(path)

    def test_unknown_camera_key_rejected(self, tmp_path):
        path = tmp_path / "scene.toml"
        path.write_text(SCENE_TOML.replace("cx = 16.0", "cx = 16.0\nskew = 0.1"))
        with pytest.raises(ConfigError):
            load_scene_config(path)

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_scene_config("/nonexistent/scene.toml")

    def test_resolve_prefers_builtin(self):
        assert resolve_scene("sphere").name == "sphere"
        with pytest.raises(ConfigError):
            resolve_scene("not-a-scene-or-file")


class TestPoseFile:
    def test_look_at_form(self, tmp_path):
        path = tmp_path / "pose.toml"
        path.write_text(
            "position = [4.0, 1.0, 0.0]\nlook_at = [0.0, 0.0, 0.0]\nfov_deg = 50.0\nwidth = 32\nheight = 24\n"
        )
        pose = load_pose_file(path)
        assert pose.width == 32 and pose.height == 24
        assert pose.cx == 16.0 and pose.cy == 12.0

    def test_quaternion_form_matches_spec_helper(self, tmp_path):
        spec = {
            "position": [0.0, 0.0, -4.0],
            "quaternion": [1.0, 0.0, 0.0, 0.0],
            "fov_deg": 53.13,
            "width": 64,
            "height": 64,
        }
        pose = pose_from_spec(spec)
        np.testing.assert_allclose(pose.orientation, np.eye(3), atol=1e-12)
        path = tmp_path / "pose.toml"
        path.write_text(
            "position = [0.0, 0.0, -4.0]\nquaternion = [1.0, 0.0, 0.0, 0.0]\n"
            "fov_deg = 53.13\nwidth = 64\nheight = 64\n"
        )
        pose2 = load_pose_file(path)
        np.testing.assert_array_equal(pose.orientation, pose2.orientation)
        np.testing.assert_array_equal(pose.position, pose2.position)

    def test_fov_bounds(self):
        with pytest.raises(ConfigError):
            pose_from_spec({"position": [0, 0, 0], "look_at": [0, 0, 1], "fov_deg": 181, "width": 8, "height": 8})

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            pose_from_spec({"position": [0, 0, 0], "look_at": [0, 0, 1], "fov_deg": 50, "width": 8,
                            "height": 8, "roll": 0.5})


class TestDumpToml:
    def test_roundtrip_through_parser(self):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib

        doc = {"scene": "sphere", "distill": {"iterations": 100, "lr": 5e-4, "enable_vdc": True,
                                              "hidden": [64, 64], "name": 'quo"te'}}
        text = dump_toml(doc)
        back = tomllib.loads(text)
        assert back["scene"] == "sphere"
        assert back["distill"]["iterations"] == 100
        assert back["distill"]["enable_vdc"] is True
        assert back["distill"]["name"] == 'quo"te'

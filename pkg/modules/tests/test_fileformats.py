import json

import numpy as np
import pytest

from modules.CustomExceptions import DimensionMismatch, ParseError, SchemaMismatch
from modules.core.PointCloud import PointCloud, unit_rows
from modules.core.RigidPose import RigidPose
from modules.fileformats.Cogp import read_cogp, write_cogp, write_cogp_binary
from modules.fileformats.PoseJson import (confidence_path, read_confidence, read_pose, write_confidence,
                                          write_pose)
from modules.fileformats.ReportJson import read_report, report_schema
from modules.fileformats.SceneFiles import list_scenes, read_scene, write_scene
from modules.scenegen.SceneGenerator import SceneSpec, generate_scene


@pytest.fixture
def cloud(rng):
    return PointCloud(rng.normal(size=(6, 3)), geom_features=unit_rows(rng.normal(size=(6, 4))),
                      sem_features=unit_rows(rng.uniform(size=(6, 2))))


def test_text_round_trip_is_exact(cloud):
    loaded = read_cogp(write_cogp(cloud))
    np.testing.assert_array_equal(loaded.points, cloud.points)
    np.testing.assert_array_equal(loaded.geom_features, cloud.geom_features)
    np.testing.assert_array_equal(loaded.sem_features, cloud.sem_features)


def test_minimal_file():
    loaded = read_cogp("COGP 1 3 0 0\n0 0 0\n1 0 0\n0 1 0\n")
    assert loaded.n == 3 and loaded.geom_features is None and loaded.sem_features is None


def test_binary_round_trip(cloud):
    data = write_cogp_binary(cloud)
    assert data[:4] == b'COGP'
    loaded = read_cogp(data)
    np.testing.assert_allclose(loaded.points, cloud.points, rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(np.linalg.norm(loaded.geom_features, axis=1), 1.0, atol=1e-12)


def test_row_length_mismatch_names_the_row():
    text = "COGP 1 2 8 0\n" + " ".join(["0"] * 11) + "\n" + " ".join(["1"] * 13) + "\n"
    with pytest.raises(DimensionMismatch) as error:
        read_cogp(text)
    assert error.value.row == 2
    assert error.value.line == 3


def test_bad_number_is_located():
    with pytest.raises(ParseError) as error:
        read_cogp("COGP 1 3 0 0\n0 0 0\n1 x 0\n0 1 0\n")
    assert (error.value.line, error.value.column) == (3, 3)


@pytest.mark.parametrize("text", [
    "",
    "PLY 1 3 0 0\n",
    "COGP 9 3 0 0\n0 0 0\n1 0 0\n0 1 0\n",
    "COGP 1 3 0 0\n0 0 0\n1 0 0\n",
    "COGP 1 3 0 0\n0 0 0\n1 0 0\n0 1 nan\n",
    "COGP 1 3 0 1\n0 0 0 1\n1 0 0 1\n0 1 0 2\n",
])
def test_malformed_files(text):
    with pytest.raises(ParseError):
        read_cogp(text)


def test_renormalize_option():
    loaded = read_cogp("COGP 1 3 0 1\n0 0 0 1\n1 0 0 1\n0 1 0 2\n", renormalize=True)
    np.testing.assert_array_equal(loaded.sem_features, 1.0)


def test_pose_round_trip(rot_z):
    pose = RigidPose(rot_z(33), [1.0, -2.0, 0.5])
    loaded, metrics = read_pose(write_pose(pose, {"ent": 1.5}))
    np.testing.assert_array_equal(loaded.rotation, pose.rotation)
    np.testing.assert_array_equal(loaded.translation, pose.translation)
    assert metrics == {"ent": 1.5}
    assert json.loads(write_pose(pose))["frame"] == "query_to_reference"


def test_pose_rotation_checks(rot_z):
    data = json.loads(write_pose(RigidPose(rot_z(10), np.zeros(3))))
    data["rotation"] = [value + 1e-8 for value in data["rotation"]]
    loaded, _ = read_pose(json.dumps(data))
    assert np.max(np.abs(loaded.rotation.T @ loaded.rotation - np.eye(3))) < 1e-9
    data["rotation"] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0]
    with pytest.raises(ParseError):
        read_pose(json.dumps(data))


def test_pose_schema_errors():
    with pytest.raises(ParseError):
        read_pose("{not json")
    with pytest.raises(SchemaMismatch):
        read_pose(json.dumps({"rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1]}))
    with pytest.raises(SchemaMismatch):
        read_pose(json.dumps({"rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1], "translation": [0, 0, 0],
                              "frame": "reference_to_query"}))


def test_confidence_sidecar(tmp_path):
    assert confidence_path(tmp_path / "pose.json") == tmp_path / "pose.confidence.json"
    conf_q, conf_r = read_confidence(write_confidence(np.array([0.0, 0.5]), np.array([1.0])))
    np.testing.assert_array_equal(conf_q, [0.0, 0.5])
    with pytest.raises(SchemaMismatch):
        read_confidence(json.dumps({"confidence_query": [1.5], "confidence_reference": []}))


def test_report_schema_version():
    with pytest.raises(SchemaMismatch):
        read_report(json.dumps({"schema_version": 2, "config": {}, "modes": [], "n_scenes": 0,
                                "record_timings": False, "results": [], "summaries": {}}))
    assert "results" in report_schema()["properties"]


def test_scene_directory_round_trip(tmp_path):
    pair = generate_scene(SceneSpec(n_points=64, overlap_fraction=0.5, outlier_fraction=0.1, seed=9))
    write_scene(tmp_path / "scene_0000", pair)
    write_scene(tmp_path / "scene_0001", pair, binary=True)
    assert [name for name, _ in list_scenes(tmp_path)] == ["scene_0000", "scene_0001"]

    loaded = read_scene(tmp_path / "scene_0000")
    np.testing.assert_array_equal(loaded.query.points, pair.query.points)
    np.testing.assert_array_equal(loaded.gt_overlap_r, pair.gt_overlap_r)
    np.testing.assert_allclose(loaded.gt_pose.rotation, pair.gt_pose.rotation, atol=1e-12)
    assert loaded.spec == pair.spec
    assert list_scenes(tmp_path / "scene_0001")[0][0] == "scene_0001"
    with pytest.raises(FileNotFoundError):
        list_scenes(tmp_path / "missing")

import json
from pathlib import Path

import numpy as np
import pytest

from modules import Cli
from modules.Cli import EXIT_DEGENERATE, EXIT_IO, EXIT_OK, EXIT_SCHEMA, flag_names, main
from modules.CustomExceptions import InfeasibleOverlap, MassMismatch, NonFiniteDual, PhaseError, ZeroWeight
from modules.fileformats.Cogp import save_cogp
from modules.fileformats.PoseJson import read_confidence, read_pose
from modules.fileformats.ReportJson import read_report

pytestmark = pytest.mark.slow

README = Path(__file__).resolve().parents[2] / 'README.rst'
FAST = ['--n-fine', '128', '--n-coarse', '64', '--descriptor-k', '16']


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"n_points": 128, "overlap_fraction": 0.5, "rotation_magnitude": 10.0, "seed": 5}))
    return path


@pytest.fixture
def scenes(tmp_path, spec_file):
    out = tmp_path / "scenes"
    assert main(['synth', '--spec', str(spec_file), '--out', str(out), '--count', '2']) == EXIT_OK
    return out


def _files(directory: Path):
    return {path.relative_to(directory): path.read_bytes() for path in sorted(directory.rglob('*')) if path.is_file()}


def test_synth_is_reproducible(tmp_path, spec_file, scenes):
    again = tmp_path / "again"
    assert main(['synth', '--spec', str(spec_file), '--out', str(again), '--count', '2']) == EXIT_OK
    assert _files(scenes) == _files(again)
    assert sorted(path.name for path in scenes.iterdir()) == ['scene_0000', 'scene_0001']


@pytest.mark.parametrize("mode", ['argmax', 'confidence_ot'])
def test_register_writes_pose_and_confidences(tmp_path, scenes, mode):
    scene = scenes / 'scene_0000'
    out = tmp_path / mode / "pose.json"
    code = main(['register', '--query', str(scene / 'query.cogp'), '--ref', str(scene / 'reference.cogp'),
                 '--out', str(out), '--mode', mode, *FAST])
    assert code == EXIT_OK
    pose, metrics = read_pose(out.read_bytes())
    assert np.linalg.det(pose.rotation) == pytest.approx(1.0)
    assert set(metrics) >= {'ent', 'delta_marginal'}
    conf_q, conf_r = read_confidence((tmp_path / mode / "pose.confidence.json").read_bytes())
    assert conf_q.shape == (128,) and conf_r.shape == (128,)


def test_register_without_sidecar(tmp_path, scenes):
    scene = scenes / 'scene_0001'
    out = tmp_path / "pose.json"
    assert main(['register', '--query', str(scene / 'query.cogp'), '--ref', str(scene / 'reference.cogp'),
                 '--out', str(out), '--no-sidecar', *FAST]) == EXIT_OK
    assert not (tmp_path / "pose.confidence.json").exists()


def test_missing_file(tmp_path, capsys):
    missing = tmp_path / "nowhere.cogp"
    assert main(['register', '--query', str(missing), '--ref', str(missing)]) == EXIT_IO
    assert str(missing) in capsys.readouterr().err


def test_malformed_file(tmp_path):
    bad = tmp_path / "bad.cogp"
    bad.write_text("COGP 1 3 0 0\n0 0 0\n")
    assert main(['register', '--query', str(bad), '--ref', str(bad)]) == EXIT_IO


def test_degenerate_geometry(tmp_path, collinear_cloud):
    line = tmp_path / "line.cogp"
    save_cogp(line, collinear_cloud)
    assert main(['register', '--query', str(line), '--ref', str(line), '--out', str(tmp_path / 'p.json'),
                 *FAST]) == EXIT_DEGENERATE


@pytest.mark.parametrize("original, expected", [
    (NonFiniteDual("row dual became non-finite"), EXIT_IO),
    (MassMismatch("row mass 3 differs from column mass 4"), EXIT_IO),
    (ZeroWeight("all weights are zero"), EXIT_DEGENERATE),
    (InfeasibleOverlap("overlap cannot be met"), EXIT_SCHEMA),
])
def test_phase_failure_exit_code_follows_the_wrapped_error(tmp_path, scenes, monkeypatch, original, expected):
    def failing_register(query, reference, cfg):
        raise PhaseError('fine', original) from original

    monkeypatch.setattr(Cli, 'register', failing_register)
    scene = scenes / 'scene_0000'
    assert main(['register', '--query', str(scene / 'query.cogp'), '--ref', str(scene / 'reference.cogp'),
                 '--out', str(tmp_path / 'p.json'), *FAST]) == expected


def test_eval_ground_truth_against_itself(scenes, capsys):
    gt = scenes / 'scene_0000' / 'gt.json'
    capsys.readouterr()
    assert main(['eval', '--pose', str(gt), '--gt', str(gt)]) == EXIT_OK
    values = dict(line.split('=') for line in capsys.readouterr().out.split())
    assert float(values['rotation_error_deg']) < 1e-5
    assert float(values['translation_error']) == 0.0
    assert float(values['overlap_iou']) == 1.0


def test_eval_rejects_mismatched_confidences(tmp_path, scenes):
    gt = scenes / 'scene_0000' / 'gt.json'
    confidence = tmp_path / "conf.json"
    confidence.write_text(json.dumps({"confidence_query": [0.5], "confidence_reference": [0.5]}))
    assert main(['eval', '--pose', str(gt), '--gt', str(gt), '--confidence', str(confidence)]) == EXIT_SCHEMA


def test_bench(tmp_path, scenes):
    report = tmp_path / "report.json"
    code = main(['bench', '--scenes', str(scenes), '--modes', 'argmax,confidence_ot', '--report', str(report),
                 '--csv', str(tmp_path / 'report.csv'), '--plot', str(tmp_path / 'cdf.png'), '--threads', '2',
                 *FAST])
    assert code == EXIT_OK
    model = read_report(report.read_bytes())
    assert model.n_scenes == 2
    assert model.modes == ['argmax', 'confidence_ot']
    assert (tmp_path / 'report.csv').read_text().startswith('scene,mode,')
    assert (tmp_path / 'cdf.png').stat().st_size > 0


def test_bench_unknown_mode(tmp_path, scenes):
    assert main(['bench', '--scenes', str(scenes), '--modes', 'icp', '--report', str(tmp_path / 'r.json')]) \
        == EXIT_SCHEMA


def test_params_file_errors(tmp_path, scenes):
    params = tmp_path / "params.yaml"
    params.write_text("temperature: 3\n")
    scene = scenes / 'scene_0000'
    assert main(['register', '--query', str(scene / 'query.cogp'), '--ref', str(scene / 'reference.cogp'),
                 '--params', str(params)]) == EXIT_SCHEMA


def test_synth_infeasible_spec(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_points": 4, "overlap_fraction": 0.5}))
    assert main(['synth', '--spec', str(spec), '--out', str(tmp_path / 'out')]) == EXIT_SCHEMA
    spec.write_text(json.dumps({"n_points": 100, "colour": "red"}))
    assert main(['synth', '--spec', str(spec), '--out', str(tmp_path / 'out')]) == EXIT_SCHEMA


def test_unknown_flag_is_rejected():
    with pytest.raises(SystemExit) as error:
        main(['register', '--query', 'q', '--ref', 'r', '--temperature', '3'])
    assert error.value.code == 2


@pytest.mark.parametrize("command", ['register', 'synth', 'bench', 'eval'])
def test_help_lists_every_flag(command, capsys):
    with pytest.raises(SystemExit):
        main([command, '--help'])
    out = capsys.readouterr().out
    for flag in flag_names()[command]:
        assert flag in out


def test_readme_documents_every_flag():
    text = README.read_text(encoding='utf-8')
    missing = sorted({flag for flags in flag_names().values() for flag in flags if flag not in text})
    assert missing == []

import glob
import json
import os

import pytest
import yaml
from click.testing import CliRunner

from pysatnet.cli import cli
from pysatnet.core.constants import (CHECKPOINT_FILE, CONFIG_FILE, HISTORY_FILE, MANIFEST_FILE, REPORT_JSON_FILE,
                                     REPORT_TEXT_FILE, RUN_LOG_FILE)

TRAIN_ARGS = ['train', '--synthetic', '--synthetic-per-class', '12', '--variant', 'baseline', '--width-divisor', '16',
              '--image-size', '32', '--epochs', '2', '--batch-size', '16', '--no-augment']


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    outDir = str(tmp_path_factory.mktemp("run"))
    result = CliRunner().invoke(cli, ['--out', outDir, '--seed', '0'] + TRAIN_ARGS)
    assert result.exit_code == 0, result.output
    return outDir, result.output


def test_synth_writes_class_folders(tmp_path, runner):
    first, second = str(tmp_path / "a"), str(tmp_path / "b")
    for outDir in (first, second):
        result = runner.invoke(cli, ['--out', outDir, '--seed', '3', 'synth', '--n', '50', '--image-size', '16'])
        assert result.exit_code == 0, result.output
        assert "Wrote 200 images" in result.output

    files = sorted(os.path.relpath(p, first) for p in glob.glob(os.path.join(first, '*', '*.png')))
    assert len(files) == 200
    assert len({os.path.dirname(f) for f in files}) == 4
    for name in files:
        with open(os.path.join(first, name), 'rb') as a, open(os.path.join(second, name), 'rb') as b:
            assert a.read() == b.read()


def test_train_writes_artifacts(trained_run):
    outDir, output = trained_run
    assert "Best validation accuracy" in output
    assert f"Checkpoint: {os.path.join(outDir, CHECKPOINT_FILE)}" in output
    for name in (CHECKPOINT_FILE, HISTORY_FILE, MANIFEST_FILE, RUN_LOG_FILE):
        assert os.path.isfile(os.path.join(outDir, name))

    with open(os.path.join(outDir, HISTORY_FILE)) as f:
        assert len(f.read().splitlines()) == 3
    with open(os.path.join(outDir, MANIFEST_FILE)) as f:
        assert len(f.read().splitlines()) == 48
    with open(os.path.join(outDir, CONFIG_FILE)) as f:
        recorded = yaml.safe_load(f)
    assert recorded['train']['variant'] == 'baseline'
    assert recorded['train']['epochs'] == 2
    assert recorded['train']['seed'] == 0
    assert recorded['train']['augment'] is False


def test_eval_is_reproducible(trained_run, runner):
    outDir, _ = trained_run
    reports = []
    for _ in range(2):
        result = runner.invoke(cli, ['--out', outDir, 'eval', '--variant', 'baseline'])
        assert result.exit_code == 0, result.output
        assert "Cohen's Kappa" in result.output
        with open(os.path.join(outDir, REPORT_JSON_FILE), 'rb') as f:
            reports.append(f.read())
    assert reports[0] == reports[1]

    document = json.loads(reports[0])
    assert len(document['confusion']) == 4
    assert all(len(row) == 4 for row in document['confusion'])
    assert document['samples'] == 4

    with open(os.path.join(outDir, CONFIG_FILE)) as f:
        recorded = yaml.safe_load(f)
    assert {'train', 'eval'} <= set(recorded)


def test_eval_rejects_other_architecture(trained_run, runner):
    outDir, _ = trained_run
    result = runner.invoke(cli, ['--out', outDir, 'eval', '--variant', 'cbam7'])
    assert result.exit_code == 1
    assert "expected spec digest" in result.output


def test_echoed_eval_config_reruns(trained_run, runner):
    outDir, _ = trained_run
    assert runner.invoke(cli, ['--out', outDir, 'eval']).exit_code == 0
    configFile = os.path.join(outDir, CONFIG_FILE)
    with open(configFile) as f:
        recorded = yaml.safe_load(f)
    assert recorded['eval']['variant'] is None
    assert recorded['train']['variant'] == 'baseline'

    result = runner.invoke(cli, ['--config', configFile, '--out', outDir, 'eval'])
    assert result.exit_code == 0, result.output


def test_report_rerender(trained_run, runner, tmp_path):
    outDir, _ = trained_run
    assert runner.invoke(cli, ['--out', outDir, 'eval']).exit_code == 0
    os.remove(os.path.join(outDir, REPORT_TEXT_FILE))

    result = runner.invoke(cli, ['--out', outDir, 'report', '--write'])
    assert result.exit_code == 0, result.output
    with open(os.path.join(outDir, REPORT_TEXT_FILE)) as f:
        assert f.read() == result.output

    missing = runner.invoke(cli, ['--out', str(tmp_path), 'report'])
    assert missing.exit_code == 2


def test_missing_data_root(tmp_path, runner):
    result = runner.invoke(cli, ['--out', str(tmp_path / "out"), 'train', '--data', str(tmp_path / "nowhere"),
                                 '--epochs', '1'])
    assert result.exit_code == 2


def test_train_without_dataset(tmp_path, runner):
    result = runner.invoke(cli, ['--out', str(tmp_path / "out"), 'train', '--epochs', '1'])
    assert result.exit_code == 1
    assert "--synthetic" in result.output


def test_unknown_config_key(tmp_path, runner):
    configFile = tmp_path / "run.yaml"
    configFile.write_text("train:\n  colour: red\n")
    result = runner.invoke(cli, ['--config', str(configFile), '--out', str(tmp_path / "out"), 'train', '--synthetic'])
    assert result.exit_code == 1
    assert "colour" in result.output


def test_config_file_sections(tmp_path, runner):
    configFile = tmp_path / "run.yaml"
    outDir = tmp_path / "synth"
    configFile.write_text(f"common:\n  seed: 4\n  out: {outDir}\nsynth:\n  n: 2\n  image_size: 16\n")
    result = runner.invoke(cli, ['--config', str(configFile), 'synth', '--n', '3'])
    assert result.exit_code == 0, result.output
    assert len(glob.glob(os.path.join(str(outDir), '*', '*.png'))) == 12

    with open(os.path.join(str(outDir), CONFIG_FILE)) as f:
        recorded = yaml.safe_load(f)['synth']
    assert (recorded['n'], recorded['imageSize'], recorded['seed']) == (3, 16, 4)

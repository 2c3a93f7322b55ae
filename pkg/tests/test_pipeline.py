import json
from pathlib import Path

import pytest

import job_loader
import utils
from dynamics import IntegralCandidate, SampledComponent
from errors import SchemaError
from verification_pipeline import VerificationPipeline, check_candidate


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def test_load_config_reads_yaml(root):
    config = utils.load_config(root / 'config' / 'config.yaml')
    assert config['numerics']['kernel_points'] == 24
    assert config['paths']['schemas'] == 'schemas'


def test_environment_overrides(root, monkeypatch):
    monkeypatch.setenv('SUPERINT_SEED', '7')
    monkeypatch.setenv('SUPERINT_LOG_LEVEL', 'DEBUG')
    config = utils.load_config(root / 'config' / 'config.yaml')
    assert config['defaults']['seed'] == 7
    assert config['logging']['level'] == 'DEBUG'


def test_missing_config(tmp_path):
    with pytest.raises(SchemaError):
        utils.load_config(tmp_path / 'nope.yaml')


def test_malformed_config(tmp_path):
    path = tmp_path / 'bad.yaml'
    path.write_text('paths: [unclosed\n')
    with pytest.raises(SchemaError):
        utils.load_config(path)


def test_write_json_is_canonical(tmp_path):
    path = utils.write_json({'b': 1, 'a': [1, 2]}, tmp_path / 'out' / 'r.json')
    assert Path(path).read_text() == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'


# ---------------------------------------------------------------------------
# Job and candidate loading
# ---------------------------------------------------------------------------

def test_invalid_document_names_the_location():
    with pytest.raises(SchemaError, match='A'):
        job_loader.validate_document({'command': 'kernel', 'A': {'A999': 1}}, 'job')


def test_unknown_schema():
    with pytest.raises(SchemaError):
        job_loader.load_schema('no_such_report')


def test_load_job_keeps_settings(root):
    job = job_loader.load_job(root / 'data' / 'jobs' / 'solveg_oscillator.json')
    assert job.command == 'solveg'
    assert job.A.A120 == job.A.A102
    assert job.settings['resolution'] == 201
    assert 'potential' not in job.settings


def test_special_component_is_integrated(root):
    job = job_loader.load_job(root / 'data' / 'jobs' / 'solveg_painleve_one.json')
    component = job.potential.component2
    assert isinstance(component, SampledComponent)
    assert component.solution.interval == pytest.approx((-1.0, 1.0))


def test_missing_sampled_file(tmp_path):
    job = {
        'command': 'solveg',
        'potential': {'components': ['x1', {'sampled': 'missing.csv', 'kind': 'P1'}]},
        'window': [[0, 1], [0, 1]],
    }
    path = tmp_path / 'job.json'
    path.write_text(json.dumps(job))
    with pytest.raises(SchemaError):
        job_loader.load_job(path)


def test_malformed_json(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"command": ')
    with pytest.raises(SchemaError):
        job_loader.read_json(path)


def test_candidate_requires_gauge_fields(tmp_path):
    path = tmp_path / 'candidate.json'
    path.write_text(json.dumps({'A': {}, 'g1': '0', 'potential': 'x1^2'}))
    with pytest.raises(SchemaError):
        job_loader.load_candidate(path)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

def test_quantum_check_skips_the_bracket(oscillator):
    candidate = IntegralCandidate(A=oscillator['A'], g1=oscillator['g1'], g2=oscillator['g2'],
                                  potential=oscillator['V'], name='oscillator')
    report = check_candidate(candidate, hbar='1/2')
    assert report.bracket is None
    assert report.passed
    assert report.to_json()['hbar'] == '1/2'


def test_pipeline_routes_candidates(config, root):
    summary = VerificationPipeline(config).run_pipeline(root / 'data' / 'candidates')
    assert summary['verified'] == ['oscillator', 'zero']
    assert summary['rejected'] == ['corrupted_oscillator']
    assert summary['total'] == 3

    verified = Path(config['paths']['verified'])
    rejected = Path(config['paths']['rejected'])
    assert (verified / 'oscillator.json').exists()
    report = json.loads((rejected / 'corrupted_oscillator.json').read_text())
    assert report['failing'] == ['g1_x1', 'zeroth']
    assert (Path(config['paths']['output']) / 'verification_summary.json').exists()


def test_unreadable_candidate_is_rejected(config, tmp_path):
    directory = tmp_path / 'candidates'
    directory.mkdir()
    (directory / 'broken.json').write_text('{"A": {}}')
    summary = VerificationPipeline(config).run_pipeline(directory)
    assert summary['rejected'] == ['broken']
    report = json.loads((Path(config['paths']['rejected']) / 'broken.json').read_text())
    assert 'error' in report

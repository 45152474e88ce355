"""
Tests for the cutfem command line
"""

import pytest
from src.cutfem import cli
from src.cutfem.cli import RESULT_HEADER, build_parser, main, merge_options
from src.cutfem.config import ConfigError
from src.cutfem.experiments import CaseResult, Check, LevelResult


def fake_result(passed=True):
    rows = [
        LevelResult(0, 0.2, 25, 40, 30, {'l2': 1e-2, 'h1': 1e-1}, cond_est=120.0),
        LevelResult(1, 0.1, 81, 120, 100, {'l2': 2.5e-3, 'h1': 5e-2}, cond_est=480.0),
    ]
    return CaseResult('fake', rows, {'l2': 2.0, 'h1': 1.0}, checks=[Check('rate_l2', passed, 'eoc 2.00')])


def run_main(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    return info.value.code


def test_version(capsys):
    """Test the version command."""
    assert run_main(['version']) == 0
    assert capsys.readouterr().out.strip() == "cutfem v0.1.0"


def test_no_command(capsys):
    """Test that a missing command prints help and fails."""
    assert run_main([]) == 1


def test_unknown_case(tmp_path, capsys):
    """Test that an unknown case is an error."""
    assert run_main(['run', 'membrane', '--out', str(tmp_path)]) == 1
    assert "Unknown case 'membrane'" in capsys.readouterr().err


def test_too_few_levels(tmp_path, capsys):
    """Test that a single level is rejected."""
    assert run_main(['run', 'poisson', '--levels', '1', '--out', str(tmp_path)]) == 1
    assert "need >= 2 levels" in capsys.readouterr().err


def test_results_written(tmp_path, monkeypatch):
    """Test the artifacts of a run."""
    monkeypatch.setattr(cli, 'run_case', lambda case, options: fake_result())
    assert run_main(['run', 'poisson', '--out', str(tmp_path), '--check', '-q']) == 0
    lines = (tmp_path / 'results.csv').read_text().splitlines()
    assert lines[0] == ','.join(RESULT_HEADER)
    assert len(lines) == 3
    first = lines[1].split(',')
    second = lines[2].split(',')
    assert first[:5] == ['0', '2.000000000000e-01', '25', '40', '30']
    assert first[RESULT_HEADER.index('err_h2')] == ''
    assert first[RESULT_HEADER.index('eoc_l2')] == ''
    assert float(second[RESULT_HEADER.index('eoc_l2')]) == pytest.approx(2.0)
    assert float(second[RESULT_HEADER.index('eoc_h1')]) == pytest.approx(1.0)
    assert (tmp_path / 'convergence.svg').exists()
    metadata = (tmp_path / 'run.txt').read_text()
    assert "case = fake" in metadata
    assert "check.rate_l2 = pass" in metadata


def test_failed_check_exit_code(tmp_path, monkeypatch):
    """Test exit code 2 only when checks are requested."""
    monkeypatch.setattr(cli, 'run_case', lambda case, options: fake_result(passed=False))
    assert run_main(['run', 'poisson', '--out', str(tmp_path), '-q']) == 0
    assert run_main(['run', 'poisson', '--out', str(tmp_path), '--check', '-q']) == 2


def test_config_precedence(tmp_path):
    """Test that flags override the config file."""
    path = tmp_path / 'run.cfg'
    path.write_text("levels = 3\nbeta = 5\ncheck = true\n")
    args = build_parser().parse_args(['run', 'poisson', '--config', str(path), '--beta', '7'])
    assert merge_options(args) == {'levels': 3, 'beta': 7.0, 'check': True}


def test_config_type_errors(tmp_path):
    """Test config values of the wrong type."""
    path = tmp_path / 'run.cfg'
    path.write_text("levels = many\n")
    args = build_parser().parse_args(['run', 'poisson', '--config', str(path)])
    with pytest.raises(ConfigError):
        merge_options(args)
    assert run_main(['run', 'poisson', '--config', str(path)]) == 1

import os

import pytest

from bench_errors import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE
from cli import main


def test_fit_and_eval(tmp_path, iris_path, capsys):
    out = str(tmp_path / 'w.txt')
    assert main(['fit', '--data', iris_path, '--label-column', 'label', '--method', 'l2blda',
                 '--d', '2', '--output', out]) == EXIT_OK
    assert os.path.exists(out)
    assert main(['eval', '--projection', out, '--train', iris_path, '--test', iris_path,
                 '--label-column', 'label']) == EXIT_OK
    assert 'accuracy 100.00%' in capsys.readouterr().out


def test_synth_and_transform(tmp_path, capsys):
    data = str(tmp_path / 'fig1.csv')
    assert main(['synth', '--kind', 'fig1', '--seed', '3', '--with-outliers', '--output', data]) == EXIT_OK
    assert '212 samples' in capsys.readouterr().out

    w = str(tmp_path / 'w.txt')
    assert main(['fit', '--data', data, '--method', 'l1blda', '--d', '1', '--output', w,
                 '--it-max', '5', '--rho', '50', '--trace', str(tmp_path / 'trace.csv')]) == EXIT_OK
    assert os.path.exists(tmp_path / 'trace.csv')
    assert main(['transform', '--projection', w, '--data', data,
                 '--output', str(tmp_path / 'projected.csv')]) == EXIT_OK


def test_bench_with_overrides(tmp_path, iris_path):
    config = tmp_path / 'bench.json'
    config.write_text(
        '{"datasets": [{"name": "iris", "path": "%s", "label_column": "label"}], "methods": ["pca", "lda"]}'
        % iris_path
    )
    out = tmp_path / 'reports'
    assert main(['bench', '--config', str(config), '--n-seeds', '2', '--d-max', '2',
                 '--output', str(out)]) == EXIT_OK
    assert (out / 'runs.csv').exists()
    assert (out / 'summary_clean.csv').exists()


@pytest.mark.parametrize('argv', [
    ['frobnicate'],
    ['fit', '--method', 'pca'],
    ['fit', '--data', 'x.csv', '--method', 'svm', '--d', '1', '--output', 'w.txt'],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_dimension_error_is_usage(tmp_path, iris_path, capsys):
    code = main(['fit', '--data', iris_path, '--label-column', 'label', '--method', 'lda',
                 '--d', '5', '--output', str(tmp_path / 'w.txt')])
    assert code == EXIT_USAGE
    assert 'd=5' in capsys.readouterr().err


def test_data_error(tmp_path):
    ragged = tmp_path / 'ragged.csv'
    ragged.write_text("1,2,1\n3,2\n")
    assert main(['fit', '--data', str(ragged), '--method', 'pca', '--d', '1',
                 '--output', str(tmp_path / 'w.txt')]) == EXIT_DATA
    assert main(['fit', '--data', str(tmp_path / 'missing.csv'), '--method', 'pca', '--d', '1',
                 '--output', str(tmp_path / 'w.txt')]) == EXIT_DATA


def test_numerical_error(tmp_path):
    broken = tmp_path / 'inf.csv'
    broken.write_text("0.0,1.0,1\ninf,0.0,1\n1.0,1.0,2\n2.0,0.5,2\n")
    assert main(['fit', '--data', str(broken), '--raw', '--method', 'l1blda', '--d', '1',
                 '--output', str(tmp_path / 'w.txt')]) == EXIT_NUMERICAL


def test_unwritable_output_is_a_data_error(tmp_path, iris_path, capsys):
    blocker = tmp_path / 'blocker'
    blocker.write_text("not a directory\n")
    code = main(['fit', '--data', iris_path, '--label-column', 'label', '--method', 'pca',
                 '--d', '1', '--output', str(blocker / 'w.txt')])
    assert code == EXIT_DATA
    err = capsys.readouterr().err
    assert err.startswith('error: ')
    assert 'Traceback' not in err

    code = main(['synth', '--kind', 'fig1', '--output', str(blocker / 'fig1.csv')])
    assert code == EXIT_DATA

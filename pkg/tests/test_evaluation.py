import io

import numpy as np
import pandas as pd
import pytest

import evaluation
from evaluation import (REPORT_COLUMNS, ExperimentConfig, bound_curve, empirical_risk, estimate_population_risk,
                        fit_bound_constant, loglog_slope, run_experiment, scaling_study, summarise_report,
                        vc_bound, write_report_csv)
from instance import Hypothesis, generate_dataset, plant_params
from learners import multimodal_decode
from utils import collate_report, derive_seed, load_experiment_config, parse_grid, resolve_m

FAST = {'test_size': 500, 'calibration_size': 5_000}


def test_empirical_risk_of_constant_hypothesis():
    X = np.linspace(-1.0, 1.0, 10)[:, np.newaxis]
    Z = np.array([1, 1, 1] + [-1] * 7)
    always_positive = Hypothesis.from_arrays([[1.0]], [10.0])
    assert empirical_risk(always_positive, X, Z) == pytest.approx(0.7)


def test_empirical_risk_is_permutation_invariant(proper_instance):
    dataset, _ = proper_instance
    h = Hypothesis.from_arrays(np.eye(9)[:2], [0.0, 0.5])
    order = np.random.default_rng(0).permutation(dataset.m)
    assert empirical_risk(h, dataset.X, dataset.Z) == empirical_risk(h, dataset.X[order], dataset.Z[order])


def test_empirical_risk_rejects_bad_input():
    h = Hypothesis.from_arrays([[1.0, 0.0]], [0.0])
    with pytest.raises(ValueError):
        empirical_risk(h, np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        empirical_risk(h, np.zeros((3, 3)), [1, 1, 1])


def test_population_risk_of_planted_hypothesis(proper_instance):
    _, witness = proper_instance
    assert estimate_population_risk(witness.planted_hypothesis(), witness.params, 2000, rng=1) == 0


def test_population_risk_of_constant_negative():
    params = plant_params('proper', 8, positive_target=0.25, seed=3)
    dataset, witness = generate_dataset(params, 10, calibration='joint')
    always_negative = Hypothesis.from_arrays(np.eye(24)[:1], [-1e6])
    assert estimate_population_risk(always_negative, witness.params, 10_000, rng=2) == pytest.approx(0.25, abs=0.02)
    with pytest.raises(ValueError):
        estimate_population_risk(always_negative, witness.params, 0)


def test_vc_bound_values():
    assert vc_bound(5, 100, 0.05) == pytest.approx(0.5101, abs=1e-4)
    ratio = vc_bound(5, 400, 0.05) / vc_bound(5, 100, 0.05)
    assert 0.5 < ratio < 0.62
    assert vc_bound(5, 100, 0.05, C=2.0) == pytest.approx(2 * vc_bound(5, 100, 0.05))


@pytest.mark.parametrize('args', [(5, 100, 1.0), (5, 100, 0.0), (5, 1, 0.05), (0, 100, 0.05)])
def test_vc_bound_rejects_bad_ranges(args):
    with pytest.raises(ValueError):
        vc_bound(*args)


def test_single_cell_experiment():
    config = ExperimentConfig(n_grid=(2,), m_grid=(50,), **FAST)
    report = run_experiment(config, progress=False)
    assert list(report.columns) == REPORT_COLUMNS
    assert len(report) == 1
    row = report.iloc[0]
    assert (row.learner, row.status, row.ambient, row.m) == ('decoder', 'ok', 6, 50)
    assert row.train_risk == 0
    assert row.bound == pytest.approx(vc_bound(6, 50, 0.05))
    assert row.seed == derive_seed(0, 0)


def test_experiment_is_reproducible():
    config = ExperimentConfig(learners=('decoder', 'perceptron'), n_grid=(1, 2), m_grid=('5x',), seeds=2, **FAST)
    first = run_experiment(config, progress=False).drop(columns='wall_ms')
    second = run_experiment(config, progress=False).drop(columns='wall_ms')
    assert first.equals(second)
    assert len(first) == 8


def test_failing_cells_are_isolated():
    config = ExperimentConfig(modes=('proper', 'improper'), n_grid=(2,), m_grid=(3, 60), **FAST)
    report = run_experiment(config, progress=False)
    assert list(report['status']) == ['invalid-argument', 'ok', 'invalid-argument', 'invalid-argument']
    assert report.loc[1, 'train_risk'] == 0
    assert np.isnan(report.loc[0, 'train_risk'])


def test_budget_exceeded_is_recorded():
    config = ExperimentConfig(learners=('bruteforce',), n_grid=(1,), m_grid=(12,),
                              learner_options={'bruteforce': {'budget': 20_000}}, **FAST)
    with pytest.warns(UserWarning):
        report = run_experiment(config, progress=False)
    assert report.loc[0, 'status'] == 'budget-exceeded'
    assert not np.isnan(report.loc[0, 'train_risk'])


def test_parallel_cells_match_serial():
    serial = ExperimentConfig(n_grid=(1, 2), m_grid=('4x',), seeds=2, **FAST)
    parallel = ExperimentConfig(n_grid=(1, 2), m_grid=('4x',), seeds=2, jobs=2, **FAST)
    assert run_experiment(serial, progress=False).drop(columns='wall_ms').equals(
        run_experiment(parallel, progress=False).drop(columns='wall_ms'))


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(learners=('svm',))
    with pytest.raises(ValueError):
        ExperimentConfig(seeds=0)


def test_config_from_yaml(tmp_path):
    path = tmp_path / 'experiments.yaml'
    path.write_text('experiment:\n  seeds: 3\n  n_grid: [1, 2]\n'
                    'learners:\n  decoder: {}\n  perceptron: {passes: 7}\n'
                    'output:\n  dir: results\n')
    config = ExperimentConfig.from_yaml(path, seeds=4)
    assert config.seeds == 4
    assert config.n_grid == (1, 2)
    assert config.learners == ('decoder', 'perceptron')
    assert config.learner_options['perceptron'] == {'passes': 7}

    path.write_text('experiment:\n  colour: blue\nlearners: {}\noutput: {}\n')
    with pytest.raises(ValueError):
        ExperimentConfig.from_yaml(path)
    path.write_text('experiment: {}\nlearners: {}\n')
    with pytest.raises(KeyError):
        ExperimentConfig.from_yaml(path)


def test_repository_config_loads():
    configs = load_experiment_config()
    assert {'experiment', 'learners', 'output'} <= set(configs)
    assert ExperimentConfig.from_yaml().learners


def test_report_csv_format():
    report = pd.DataFrame([
        {'learner': 'decoder', 'mode': 'proper', 'n': 2, 'ambient': 6, 'm': 60, 'seed': 17, 'status': 'ok',
         'train_risk': 0.0, 'test_risk': 0.0123456789, 'wall_ms': 1.23456789, 'bound': 0.5101123},
        {'learner': 'decoder', 'mode': 'improper', 'n': 3, 'ambient': np.nan, 'm': np.nan, 'seed': 18,
         'status': 'invalid-argument', 'train_risk': np.nan, 'test_risk': np.nan, 'wall_ms': np.nan,
         'bound': np.nan},
    ], columns=REPORT_COLUMNS)
    buffer = io.StringIO()
    write_report_csv(report, buffer)
    lines = buffer.getvalue().split('\n')
    assert lines[0] == 'learner,mode,n,ambient,m,seed,status,train_risk,test_risk,wall_ms,bound'
    assert lines[1] == 'decoder,proper,2,6,60,17,ok,0.000000,0.012346,1.23457,0.510112'
    assert lines[2] == 'decoder,improper,3,,,18,invalid-argument,,,,'


def test_summary_and_collation(capsys):
    config = ExperimentConfig(learners=('decoder', 'perceptron'), n_grid=(1,), m_grid=(20,), seeds=3, **FAST)
    report = run_experiment(config, progress=False)
    summary = summarise_report(report)
    assert list(summary['learner']) == ['decoder', 'perceptron']
    assert list(summary['runs']) == [3, 3]
    collate_report(report)
    assert 'perceptron' in capsys.readouterr().out


def test_fit_bound_constant():
    report = pd.DataFrame({'ambient': [6, 6, 6], 'm': [100, 100, 1000], 'train_risk': [0.0, 0.1, 0.0],
                           'test_risk': [0.05, 0.9, 0.01], 'status': ['ok', 'ok', 'ok']})
    expected = max(0.05 / vc_bound(6, 100, 0.05), 0.01 / vc_bound(6, 1000, 0.05))
    assert fit_bound_constant(report) == pytest.approx(expected)
    assert fit_bound_constant(report.iloc[1:2]) == 0.0


def test_loglog_slope():
    xs = np.array([2.0, 4.0, 8.0, 16.0])
    assert loglog_slope(xs, 3 * xs ** 2) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        loglog_slope([1.0], [1.0])
    with pytest.raises(ValueError):
        loglog_slope([1.0, 2.0], [0.0, 1.0])


def test_grid_tokens():
    assert parse_grid(['n=2,4,8', 'm=10x,500']) == {'n': [2, 4, 8], 'm': ['10x', 500]}
    assert resolve_m('10x', 6) == 60
    assert resolve_m(500, 6) == 500
    with pytest.raises(ValueError):
        parse_grid(['n'])


def test_scaling_study_contrast():
    with pytest.warns(UserWarning):
        table = scaling_study([1, 2], m_rule=lambda ambient: 14 if ambient == 3 else 30, repeats=2,
                              calibration_size=5_000, progress=False)
    assert list(table['m']) == [14, 30]
    assert list(table['bruteforce_status']) == ['ok', 'budget-exceeded']
    assert np.all(table['decoder_ms'] > 0)
    assert table.loc[0, 'bruteforce_ms'] > 0
    assert np.isnan(table.loc[1, 'bruteforce_ms'])


def test_scaling_study_reports_time_limit_separately():
    with pytest.warns(UserWarning):
        table = scaling_study([1], m_rule=lambda ambient: 14, repeats=1, bruteforce_budget=None,
                              bruteforce_time_limit=0.0, calibration_size=5_000, progress=False)
    assert list(table['bruteforce_status']) == ['timeout']


def test_scaling_study_times_bruteforce_after_warmup(monkeypatch):
    calls = list()
    monkeypatch.setattr(evaluation, 'brute_force_erm', lambda *args: calls.append(args))
    table = scaling_study([1], m_rule=lambda ambient: 10, repeats=5, calibration_size=5_000, progress=False)
    assert len(calls) == 6
    assert table.loc[0, 'bruteforce_status'] == 'ok'


def test_scaling_study_requires_ascending_grid():
    with pytest.raises(ValueError):
        scaling_study([4, 2], progress=False)


@pytest.mark.slow
def test_decoder_runtime_scaling():
    table = scaling_study([8, 16, 32, 64, 128], bruteforce=False, progress=False)
    assert loglog_slope(table['n'], table['decoder_ms']) <= 3.2


@pytest.mark.slow
def test_generalisation_bound_holds():
    curve = bound_curve(n=5, progress=False)
    medians = curve.groupby('m')['test_risk'].median().sort_index()
    assert np.all(np.diff(medians.values) <= 0)
    assert fit_bound_constant(curve) <= 5.0


def test_decoded_hypothesis_generalises():
    params = plant_params('proper', 5, positive_target=0.5, seed=21)
    train, witness = generate_dataset(params, 1000, calibration_size=20_000)
    test, _ = generate_dataset(witness.params, 10_000, rng=derive_seed(21, 1))
    h = multimodal_decode(train)
    assert empirical_risk(h, train.X, train.Z) == 0
    assert empirical_risk(h, test.X, test.Z) <= 0.05

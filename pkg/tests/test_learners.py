import numpy as np
import pytest

from evaluation import empirical_risk
from instance import Dataset, build_Q_improper, build_Q_proper, generate_dataset, plant_params
from learners import (LEARNERS, BudgetExceededError, CorruptedFingerprintError, DecodeError,
                      all_negative_hypothesis, brute_force_erm, fit_thresholds, local_search_unimodal,
                      multimodal_decode, recover_directions, recover_fingerprint, single_halfspace_baseline)
from linalg import unit_sphere_sample


def _instance(mode, n, seed, m=None):
    params = plant_params(mode, n, positive_target=0.5, seed=seed)
    ambient = params.ambient_dim
    return generate_dataset(params, m or 10 * ambient, calibration_size=20_000)


@pytest.mark.parametrize('n', [1, 2, 3, 5, 8])
@pytest.mark.parametrize('seed', [0, 1, 2])
def test_decoder_is_consistent_on_proper_instances(n, seed):
    dataset, witness = _instance('proper', n, seed)
    h = multimodal_decode(dataset)
    assert empirical_risk(h, dataset.X, dataset.Z) == 0
    assert np.max(np.abs(h.directions - witness.params.padded_directions())) <= 1e-8


@pytest.mark.parametrize('n', [4, 9, 16])
def test_decoder_is_consistent_on_improper_instances(n):
    dataset, witness = _instance('improper', n, seed=n)
    h = multimodal_decode(dataset)
    assert h.k == int(np.sqrt(n)) - 1
    assert empirical_risk(h, dataset.X, dataset.Z) == 0
    assert np.max(np.abs(h.directions - witness.params.padded_directions())) <= 1e-8


def test_fitted_thresholds_never_exceed_planted():
    for seed in range(20):
        dataset, witness = _instance('proper', 3, seed)
        h = multimodal_decode(dataset)
        assert np.all(h.thresholds <= np.array(witness.params.thresholds))


def test_recover_fingerprint_matches_witness(proper_instance):
    dataset, witness = proper_instance
    assert np.allclose(recover_fingerprint(dataset), witness.Q, atol=1e-10)


def test_exact_direction_recovery_without_data():
    rng = np.random.default_rng(9)
    for n in range(1, 10):
        r1, r2 = unit_sphere_sample(rng, n), unit_sphere_sample(rng, n)
        recovered = recover_directions(build_Q_proper(r1, r2), 'proper', n)
        assert np.max(np.abs(recovered[0] - r1)) <= 1e-12
        assert np.max(np.abs(recovered[1] - r2)) <= 1e-12
    directions = [unit_sphere_sample(rng, 4) for _ in range(3)]
    recovered = recover_directions(build_Q_improper(directions, 16), 'improper', 16)
    assert np.max(np.abs(np.stack(recovered) - np.stack(directions))) <= 1e-12


def test_identity_is_not_a_fingerprint():
    with pytest.raises(CorruptedFingerprintError):
        recover_directions(np.eye(6), 'proper', 2)


def test_decoder_reports_rank_deficiency():
    rng = np.random.default_rng(0)
    Q = build_Q_proper(unit_sphere_sample(rng, 2), unit_sphere_sample(rng, 2))
    X = rng.standard_normal((30, 6))
    X[:, 4:] = 0.0
    dataset = Dataset('proper', 2, 6, 0, X, X @ Q.T, np.ones(30, dtype=int))
    with pytest.raises(DecodeError) as e:
        multimodal_decode(dataset)
    assert e.value.rank == 4
    assert '4' in str(e.value)


def test_decoder_needs_enough_rows():
    dataset, _ = _instance('proper', 2, seed=0, m=5)
    with pytest.raises(ValueError):
        multimodal_decode(dataset)


def test_decoder_flags_data_from_another_construction():
    rng = np.random.default_rng(1)
    Q = np.linalg.qr(rng.standard_normal((6, 6)))[0]
    X = rng.standard_normal((20, 6))
    dataset = Dataset('proper', 2, 6, 0, X, X @ Q.T, np.where(X[:, 0] > 0, 1, -1))
    with pytest.raises(CorruptedFingerprintError):
        multimodal_decode(dataset)


def test_fit_thresholds_takes_max_over_positives():
    X = np.array([[-0.7, 5.0], [0.3, 1.0], [0.1, -2.0], [4.0, 0.0]])
    Z = np.array([1, 1, 1, -1])
    assert fit_thresholds(X, Z, [[1.0, 0.0]])[0] == 0.3


def test_all_negative_sentinel():
    X = np.random.default_rng(2).standard_normal((10, 3))
    Z = -np.ones(10, dtype=int)
    directions = np.eye(3)[:2]
    h = all_negative_hypothesis(X, directions)
    assert np.array_equal(fit_thresholds(X, Z, directions), h.thresholds)
    assert empirical_risk(h, X, Z) == 0


def test_brute_force_needs_two_halfspaces_for_five_points(five_points):
    X, Z = five_points
    assert empirical_risk(brute_force_erm(X, Z, k=1), X, Z) >= 0.2
    assert empirical_risk(brute_force_erm(X, Z, k=2), X, Z) == 0


def test_brute_force_separable_set(separable_points):
    X, Z = separable_points
    X, Z = X[::3], Z[::3]
    assert empirical_risk(brute_force_erm(X, Z, k=1), X, Z) == 0


def test_brute_force_agrees_with_decoder_on_tiny_instances():
    for seed in range(5):
        dataset, _ = _instance('proper', 1, seed, m=10)
        oracle = brute_force_erm(dataset.X, dataset.Z, k=2)
        assert empirical_risk(oracle, dataset.X, dataset.Z) == 0
        assert empirical_risk(multimodal_decode(dataset), dataset.X, dataset.Z) == 0


def test_brute_force_budget(five_points):
    X, Z = five_points
    with pytest.warns(UserWarning), pytest.raises(BudgetExceededError) as e:
        brute_force_erm(X, Z, k=1, budget=10)
    assert e.value.best is None
    with pytest.warns(UserWarning), pytest.raises(BudgetExceededError) as e:
        brute_force_erm(X, Z, k=1, budget=50)
    assert e.value.best is not None
    assert e.value.evaluations > 0


def test_brute_force_rejects_large_k(five_points):
    with pytest.raises(ValueError):
        brute_force_erm(*five_points, k=3)


def test_local_search_is_deterministic(five_points):
    X, Z = five_points
    first = local_search_unimodal(X, Z, k=2, restarts=3, iters=50, rng=4)
    second = local_search_unimodal(X, Z, k=2, restarts=3, iters=50, rng=4)
    assert first == second


def test_local_search_never_worse_than_all_negative():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((40, 3))
    Z = np.where(rng.uniform(size=40) < 0.3, 1, -1)
    h = local_search_unimodal(X, Z, k=2, restarts=2, iters=20, rng=1)
    assert empirical_risk(h, X, Z) <= np.mean(Z == 1)


def test_local_search_traces_do_not_increase(five_points):
    X, Z = five_points
    _, traces = local_search_unimodal(X, Z, k=2, restarts=4, iters=60, rng=0, return_trace=True)
    assert len(traces) == 4
    for trace in traces:
        assert len(trace) == 61
        assert np.all(np.diff(trace) <= 0)


def test_local_search_separable(separable_points):
    X, Z = separable_points
    solved = sum(empirical_risk(local_search_unimodal(X, Z, k=1, rng=seed), X, Z) == 0 for seed in range(20))
    assert solved >= 18


def test_perceptron_separable(separable_points):
    X, Z = separable_points
    h = single_halfspace_baseline(X, Z)
    assert h.k == 1
    assert empirical_risk(h, X, Z) == 0


@pytest.mark.parametrize('label', [1, -1])
def test_perceptron_single_class(label):
    X = np.random.default_rng(0).standard_normal((15, 2))
    Z = np.full(15, label)
    assert empirical_risk(single_halfspace_baseline(X, Z), X, Z) == 0


def test_perceptron_cannot_fit_two_halfspace_concept(five_points):
    X, Z = five_points
    assert empirical_risk(single_halfspace_baseline(X, Z), X, Z) > 0


def test_registry_runs_every_learner(proper_instance):
    dataset, _ = proper_instance
    options = {'k': 2, 'restarts': 2, 'iters': 10, 'passes': 5, 'budget': 1}
    for name, fit in LEARNERS.items():
        if name == 'bruteforce':
            with pytest.warns(UserWarning), pytest.raises(BudgetExceededError):
                fit(dataset, 0, options)
        else:
            assert fit(dataset, np.random.default_rng(0), options).dim == dataset.ambient_dim


@pytest.mark.slow
def test_decoder_acceptance_sweep():
    for seed in range(500):
        n = 1 + seed % 16
        dataset, witness = _instance('proper', n, seed)
        h = multimodal_decode(dataset)
        assert empirical_risk(h, dataset.X, dataset.Z) == 0
        assert np.max(np.abs(h.directions - witness.params.padded_directions())) <= 1e-8
    for seed in range(100):
        for n in (4, 9, 16, 25):
            dataset, witness = _instance('improper', n, seed)
            h = multimodal_decode(dataset)
            assert empirical_risk(h, dataset.X, dataset.Z) == 0
            assert np.max(np.abs(h.directions - witness.params.padded_directions())) <= 1e-8


@pytest.mark.slow
def test_brute_force_oracle_equivalence():
    for seed in range(50):
        dataset, _ = _instance('proper', 1, seed, m=8 + seed % 7)
        assert empirical_risk(brute_force_erm(dataset.X, dataset.Z, k=2), dataset.X, dataset.Z) == 0

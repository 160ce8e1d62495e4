import multiprocessing as mp
import time
from dataclasses import dataclass, field, fields

import numpy as np
import pandas as pd
from sklearn.metrics import zero_one_loss
from tqdm import tqdm

from instance import (CALIBRATION_SIZE, CALIBRATIONS, DISTRIBUTIONS, MODES, generate_dataset, plant_params,
                      predict_many, sample_points)
from learners import (DEFAULT_BUDGET, LEARNERS, BudgetExceededError, CorruptedFingerprintError, DecodeError,
                      brute_force_erm, multimodal_decode)
from utils import derive_seed, load_experiment_config, make_rng, resolve_m, time_call

REPORT_COLUMNS = ['learner', 'mode', 'n', 'ambient', 'm', 'seed', 'status', 'train_risk', 'test_risk', 'wall_ms',
                  'bound']
RISK_COLUMNS = ['train_risk', 'test_risk']
COUNT_COLUMNS = ['n', 'ambient', 'm', 'seed']


def empirical_risk(h, X, Z):
    """
    Fraction of rows of X that h labels differently from Z.

    :param h:   Hypothesis
    :param X:   ndarray (m, d) with m >= 1
    :param Z:   labels +1/-1
    :returns:   float in [0, 1]
    :raises ValueError: if m < 1 or the dimensions do not match
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.asarray(Z, dtype=int).ravel()
    if len(Z) < 1:
        raise ValueError('Empirical risk needs at least one row')
    if len(X) != len(Z):
        raise ValueError(f'{len(X)} points but {len(Z)} labels')
    errors = zero_one_loss(Z, predict_many(h, X), normalize=False)
    return float(errors) / len(Z)


def estimate_population_risk(h, params, n_test, rng=None):
    """
    Monte Carlo estimate of the population risk of h on fresh draws labelled by the planted concept of params.

    :param h:       Hypothesis over the ambient space
    :param params:  InstanceParams with thresholds set
    :param n_test:  number of fresh draws, >= 1
    :param rng:     numpy Generator, seed or None
    :returns:       float in [0, 1]
    """
    if int(n_test) < 1:
        raise ValueError(f'n_test must be at least 1, got {n_test}')
    X = sample_points(np.random.default_rng(rng), int(n_test), params.ambient_dim, params.distribution)
    return empirical_risk(h, X, predict_many(params.planted_hypothesis(), X))


def vc_bound(n_ambient, m, delta, C=1.0):
    """
    C * sqrt((n * ln m + ln(1/delta)) / m), the generalisation bound of a consistent learner over intersections of
    halfspaces in n_ambient dimensions.

    :raises ValueError: if m < 2, delta not in (0, 1), C <= 0 or n_ambient < 1
    """
    if m < 2:
        raise ValueError(f'm must be at least 2, got {m}')
    if not 0.0 < delta < 1.0:
        raise ValueError(f'delta must lie in (0, 1), got {delta}')
    if C <= 0:
        raise ValueError(f'C must be positive, got {C}')
    if n_ambient < 1:
        raise ValueError(f'n_ambient must be positive, got {n_ambient}')
    return C * float(np.sqrt((n_ambient * np.log(m) + np.log(1.0 / delta)) / m))


@dataclass
class ExperimentConfig:
    """
    Grid of an experiment sweep. Entries of m_grid are sample counts or 'Kx' for K times the ambient dimension.
    """
    learners: tuple = ('decoder',)
    modes: tuple = ('proper',)
    n_grid: tuple = (2,)
    m_grid: tuple = ('10x',)
    seeds: int = 1
    test_size: int = 10_000
    master_seed: int = 0
    delta: float = 0.05
    bound_constant: float = 1.0
    positive_target: float = 0.5
    distribution: str = 'gaussian'
    calibration: str = 'independent'
    calibration_size: int = CALIBRATION_SIZE
    learner_options: dict = field(default_factory=dict)
    jobs: int = 1

    def __post_init__(self):
        self.learners = tuple(self.learners)
        self.modes = tuple(self.modes)
        self.n_grid = tuple(int(n) for n in self.n_grid)
        self.m_grid = tuple(self.m_grid)
        for name in self.learners:
            if name not in LEARNERS:
                raise ValueError(f'Unknown learner \'{name}\', expected one of {list(LEARNERS)}')
        for mode in self.modes:
            if mode not in MODES:
                raise ValueError(f'Unknown mode \'{mode}\', expected one of {MODES}')
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f'Unknown distribution \'{self.distribution}\'')
        if self.calibration not in CALIBRATIONS:
            raise ValueError(f'Unknown calibration method \'{self.calibration}\'')
        if self.seeds < 1 or self.test_size < 1 or self.jobs < 1:
            raise ValueError('seeds, test_size and jobs must be positive')

    @classmethod
    def from_yaml(cls, path=None, **overrides):
        """
        Builds a config from the 'experiment' and 'learners' sections of the YAML config, overrides win.

        :raises KeyError:   if a required section is missing
        :raises ValueError: on unknown experiment keys
        """
        configs = load_experiment_config(path)
        values = dict(configs['experiment'] or dict())
        learners = configs['learners'] or dict()
        values.setdefault('learners', tuple(learners))
        values.setdefault('learner_options', {name: dict(opts or dict()) for name, opts in learners.items()})
        values.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f'Unknown experiment config keys: {unknown}')
        return cls(**values)

    def cells(self):
        """grid cells (mode, n, m_spec, seed index) in deterministic order"""
        return [(mode, n, m_spec, s) for mode in self.modes for n in self.n_grid for m_spec in self.m_grid
                for s in range(self.seeds)]


def _status_of(error):
    if isinstance(error, CorruptedFingerprintError):
        return 'corrupted-fingerprint'
    if isinstance(error, DecodeError):
        return 'decode-failure'
    if isinstance(error, BudgetExceededError):
        return 'budget-exceeded'
    return 'invalid-argument'


def _run_cell(task):
    """generates the dataset of one cell and runs every configured learner on it, one row per learner"""
    config, cell, (mode, n, m_spec, _) = task
    seed = derive_seed(config.master_seed, cell)
    row_base = {'mode': mode, 'n': n, 'ambient': np.nan, 'm': np.nan, 'seed': seed}
    try:
        params = plant_params(mode, n, config.positive_target, seed, config.distribution)
        row_base['ambient'] = params.ambient_dim
        row_base['m'] = resolve_m(m_spec, params.ambient_dim)
        dataset, witness = generate_dataset(params, row_base['m'], calibration_size=config.calibration_size,
                                            calibration=config.calibration)
    except ValueError:
        return [dict(row_base, learner=name, status='invalid-argument', train_risk=np.nan, test_risk=np.nan,
                     wall_ms=np.nan, bound=np.nan) for name in config.learners]

    rows = list()
    for j, name in enumerate(config.learners):
        rng = make_rng(config.master_seed, cell, 2 + j)
        options = config.learner_options.get(name, dict())
        status, h = 'ok', None
        start = time.perf_counter()
        try:
            h = LEARNERS[name](dataset, rng, options)
        except BudgetExceededError as e:
            status, h = 'budget-exceeded', e.best
        except (ValueError, DecodeError) as e:
            status = _status_of(e)
        wall_ms = (time.perf_counter() - start) * 1000.0

        train_risk = test_risk = bound = np.nan
        if h is not None:
            train_risk = empirical_risk(h, dataset.X, dataset.Z)
            test_risk = estimate_population_risk(h, witness.params, config.test_size,
                                                 make_rng(config.master_seed, cell, 1))
            if status == 'ok' and train_risk == 0 and dataset.m >= 2:
                bound = vc_bound(dataset.ambient_dim, dataset.m, config.delta, config.bound_constant)
        rows.append(dict(row_base, learner=name, status=status, train_risk=train_risk, test_risk=test_risk,
                         wall_ms=wall_ms, bound=bound))
    return rows


def run_experiment(config, progress=True):
    """
    Runs every learner on every grid cell: generate, train, measure training risk, test risk on fresh draws and wall
    time. Per-cell seeds are derived from (master seed, cell index), so results do not depend on execution order or
    on config.jobs. Learner failures are recorded in the status column.

    :param config:      ExperimentConfig
    :param progress:    show a tqdm progress bar
    :returns:           pandas DataFrame with REPORT_COLUMNS, rows in grid order
    """
    tasks = [(config, cell, spec) for cell, spec in enumerate(config.cells())]
    if config.jobs > 1:
        with mp.Pool(config.jobs) as pool:
            results = list(tqdm(pool.imap(_run_cell, tasks), total=len(tasks), desc='cells', disable=not progress))
    else:
        results = [_run_cell(task) for task in tqdm(tasks, desc='cells', disable=not progress)]
    return pd.DataFrame([row for rows in results for row in rows], columns=REPORT_COLUMNS)


def _format_value(value, column):
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ''
    if column in RISK_COLUMNS:
        return f'{value:.6f}'
    if column in COUNT_COLUMNS:
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f'{value:.6g}'
    return str(value)


def write_report_csv(report, target):
    """
    Writes a report as CSV with the columns of REPORT_COLUMNS: risks with 6 decimals, other floats with 6 significant
    digits, empty fields for missing values.

    :param report:  pandas DataFrame
    :param target:  path or text stream
    """
    formatted = pd.DataFrame({column: [_format_value(v, column) for v in report[column]] for column in report.columns})
    formatted.to_csv(target, index=False, lineterminator='\n')


def summarise_report(report):
    """median test risk and wall time of successful runs per (learner, mode, n, m)"""
    ok = report[report['status'] == 'ok']
    grouped = ok.groupby(['learner', 'mode', 'n', 'm'], sort=False)
    return grouped.agg(runs=('test_risk', 'size'), median_test_risk=('test_risk', 'median'),
                       median_wall_ms=('wall_ms', 'median')).reset_index()


def fit_bound_constant(report, delta=0.05):
    """
    Smallest C such that every consistent run (status ok, training risk 0) satisfies
    test_risk <= C * vc_bound(ambient, m, delta, 1).

    :param report:  DataFrame with columns ambient, m, train_risk, test_risk and optionally status
    :returns:       float, 0.0 if there is no consistent run
    """
    consistent = report[(report['train_risk'] == 0) & report['test_risk'].notna() & (report['m'] >= 2)]
    if 'status' in consistent:
        consistent = consistent[consistent['status'] == 'ok']
    ratios = [row.test_risk / vc_bound(int(row.ambient), int(row.m), delta) for row in consistent.itertuples()]
    return float(max(ratios, default=0.0))


def bound_curve(n=5, m_grid=(50, 150, 500, 1500, 5000), seeds=20, test_size=10_000, delta=0.05, C=1.0, mode='proper',
                master_seed=0, positive_target=0.5, distribution='gaussian', jobs=1, progress=True):
    """
    Decoder test risk against the generalisation bound over a ladder of training sizes for one base dimension.

    :returns: DataFrame with columns n, ambient, m, seed, train_risk, test_risk, bound
    """
    config = ExperimentConfig(learners=('decoder',), modes=(mode,), n_grid=(n,), m_grid=tuple(m_grid), seeds=seeds,
                              test_size=test_size, master_seed=master_seed, delta=delta, bound_constant=C,
                              positive_target=positive_target, distribution=distribution, jobs=jobs)
    report = run_experiment(config, progress=progress)
    curve = report[report['status'] == 'ok'].copy()
    curve['bound'] = [vc_bound(int(a), int(m), delta, C) for a, m in zip(curve['ambient'], curve['m'])]
    return curve[['n', 'ambient', 'm', 'seed', 'train_risk', 'test_risk', 'bound']].reset_index(drop=True)


def loglog_slope(xs, ys):
    """
    Least squares slope of log(ys) against log(xs).

    :raises ValueError: with fewer than two points or non-positive values
    """
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if len(xs) < 2 or len(xs) != len(ys):
        raise ValueError('Need at least two (x, y) pairs of equal length')
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError('log-log regression needs positive values')
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def scaling_study(n_grid, m_rule='10x', repeats=5, mode='proper', master_seed=0, bruteforce=True,
                  bruteforce_max_ambient=6, bruteforce_budget=DEFAULT_BUDGET, bruteforce_time_limit=60.0,
                  calibration_size=CALIBRATION_SIZE, progress=True):
    """
    Measures decoder wall time (median of repeats after one warm-up call) for growing n, and brute force ERM time
    the same way where its budget admits. Cells run serially. bruteforce_status is ok, skipped (ambient too large),
    budget-exceeded (evaluation budget) or timeout (time limit hit).

    :param n_grid:                  ascending base dimensions
    :param m_rule:                  callable ambient -> m, or an m grid entry such as '10x'
    :param repeats:                 timed calls per measurement
    :param mode:                    'proper' or 'improper'
    :param master_seed:             seed the per-cell instances are derived from
    :param bruteforce:              also time brute_force_erm (k = 2)
    :param bruteforce_max_ambient:  brute force is skipped above this ambient dimension
    :param bruteforce_budget:       evaluation budget of brute force
    :param bruteforce_time_limit:   wall time limit of brute force in seconds
    :returns: DataFrame with columns n, ambient, m, decoder_ms, bruteforce_ms, bruteforce_status
    """
    n_grid = [int(n) for n in n_grid]
    if n_grid != sorted(n_grid):
        raise ValueError(f'n_grid must be ascending, got {n_grid}')
    rows = list()
    for i, n in enumerate(tqdm(n_grid, desc='scaling', disable=not progress)):
        params = plant_params(mode, n, seed=derive_seed(master_seed, i))
        ambient = params.ambient_dim
        m = m_rule(ambient) if callable(m_rule) else resolve_m(m_rule, ambient)
        dataset, _ = generate_dataset(params, m, calibration_size=calibration_size)
        decoder_ms, _ = time_call(lambda: multimodal_decode(dataset), repeats=repeats)

        bruteforce_ms, bruteforce_status = np.nan, 'skipped'
        if bruteforce and ambient <= bruteforce_max_ambient:
            try:
                bruteforce_ms, _ = time_call(
                    lambda: brute_force_erm(dataset.X, dataset.Z, 2, bruteforce_budget, bruteforce_time_limit),
                    repeats=repeats)
                bruteforce_status = 'ok'
            except BudgetExceededError as e:
                bruteforce_status = 'timeout' if e.reason == 'time' else 'budget-exceeded'
        rows.append({'n': n, 'ambient': ambient, 'm': m, 'decoder_ms': decoder_ms, 'bruteforce_ms': bruteforce_ms,
                     'bruteforce_status': bruteforce_status})
    return pd.DataFrame(rows)

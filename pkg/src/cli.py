"""
Command line entry point, run from the repository root:

    python src/cli.py gen --mode proper --n 4 --m 200 --seed 7 --pos 0.3 --out d.txt --witness w.txt
    python src/cli.py decode --data d.txt --witness w.txt --out h.txt
    python src/cli.py baseline --data d.txt --learner localsearch
    python src/cli.py verify --data d.txt --witness w.txt
    python src/cli.py bench --grid n=2,4,8 m=10x --seeds 5
    python src/cli.py bound-curve --n 5 --seeds 20

Exit codes: 0 success, 1 I/O failure, 2 usage or parse error, 3 decode failure, 4 verification failure.
"""
import argparse
import sys
import time

import numpy as np

from evaluation import (ExperimentConfig, bound_curve, empirical_risk, fit_bound_constant, loglog_slope,
                        run_experiment, scaling_study, write_report_csv)
from instance import (CALIBRATIONS, DISTRIBUTIONS, MODES, ParseError, generate_dataset, parse_dataset,
                      parse_witness, plant_params, predict_many, serialize_dataset, serialize_hypothesis,
                      serialize_witness)
from learners import (DEFAULT_BUDGET, LEARNERS, BudgetExceededError, CorruptedFingerprintError, DecodeError,
                      multimodal_decode, pad_directions, recover_directions)
from linalg import orthogonality_error
from utils import check_seed, collate_report, parse_grid, print_dataset_info

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_DECODE, EXIT_VERIFY = 0, 1, 2, 3, 4
VERIFY_TOL = 1e-9

DEFAULTS = {
    'gen'        : {'seed': 0, 'pos': 0.5, 'dist': 'gaussian', 'calibration': 'independent', 'verbose': False},
    'decode'     : {'verbose': False},
    'baseline'   : {'k': 2, 'seed': 0, 'restarts': 20, 'iters': 200, 'passes': 50, 'budget': DEFAULT_BUDGET},
    'verify'     : {},
    'bench'      : {'learners': ['decoder'], 'scaling': False},
    'bound-curve': {'n': 5, 'm': [50, 150, 500, 1500, 5000], 'seeds': 20, 'test_size': 10_000, 'delta': 0.05,
                    'C': 1.0, 'master_seed': 0, 'jobs': 1},
}
REQUIRED = {
    'gen'        : ['mode', 'n', 'm', 'out', 'witness'],
    'decode'     : ['data', 'out'],
    'baseline'   : ['data', 'learner'],
    'verify'     : ['data', 'witness'],
    'bench'      : [],
    'bound-curve': [],
}


class UsageError(Exception):
    pass


class VerificationError(Exception):
    pass


def _read(path):
    with open(path, encoding='utf-8') as f:
        return f.read()


def _write(path, text):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)


def _flag(parser, *names, **kwargs):
    kwargs.setdefault('default', None)
    parser.add_argument(*names, **kwargs)


def build_parser():
    parser = argparse.ArgumentParser(prog='cli.py', description='Bimodal halfspace intersection learning')
    subparsers = parser.add_subparsers(dest='command', required=True)

    gen = subparsers.add_parser('gen', help='Generate a planted dataset and its witness')
    _flag(gen, '--mode', choices=MODES, help='Construction, proper (ambient 3n) or improper (ambient n)')
    _flag(gen, '--n', type=int, help='Base dimension, a perfect square in improper mode')
    _flag(gen, '--m', type=int, help='Number of rows')
    _flag(gen, '--seed', type=int, help='Unsigned 64-bit seed')
    _flag(gen, '--pos', type=float, help='Target fraction of positive rows in (0, 1)')
    _flag(gen, '--dist', choices=DISTRIBUTIONS, help='Sampling distribution of x')
    _flag(gen, '--calibration', choices=CALIBRATIONS, help='Threshold calibration method')
    _flag(gen, '--out', help='Dataset file to write')
    _flag(gen, '--witness', help='Witness file to write')
    _flag(gen, '-v', '--verbose', action='store_true', help='Print dataset information', dest='verbose')

    decode = subparsers.add_parser('decode', help='Learn a hypothesis with the multimodal decoder')
    _flag(decode, '--data', help='Dataset file')
    _flag(decode, '--witness', help='Optional witness file to compare the recovered directions against')
    _flag(decode, '--out', help='Hypothesis file to write')
    _flag(decode, '-v', '--verbose', action='store_true', help='Print dataset information', dest='verbose')

    baseline = subparsers.add_parser('baseline', help='Run a unimodal baseline on (x, z)')
    _flag(baseline, '--data', help='Dataset file')
    _flag(baseline, '--learner', choices=[name for name in LEARNERS if name != 'decoder'], help='Baseline learner')
    _flag(baseline, '--k', type=int, help='Number of halfspaces for bruteforce and localsearch')
    _flag(baseline, '--seed', type=int, help='Seed of randomised learners')
    _flag(baseline, '--restarts', type=int, help='Local search restarts')
    _flag(baseline, '--iters', type=int, help='Local search iterations per restart')
    _flag(baseline, '--passes', type=int, help='Perceptron passes')
    _flag(baseline, '--budget', type=int, help='Brute force evaluation budget')
    _flag(baseline, '--time-limit', type=float, help='Brute force time limit in seconds', dest='time_limit')
    _flag(baseline, '--out', help='Optional hypothesis file to write')

    verify = subparsers.add_parser('verify', help='Check a dataset against its witness')
    _flag(verify, '--data', help='Dataset file')
    _flag(verify, '--witness', help='Witness file')

    bench = subparsers.add_parser('bench', help='Run an experiment sweep and write the report CSV')
    _flag(bench, '--grid', nargs='+', help='Grid tokens, e.g. n=2,4,8 m=10x,500')
    _flag(bench, '--seeds', type=int, help='Seeds per grid cell')
    _flag(bench, '--learners', nargs='+', choices=list(LEARNERS), help='Learners to run')
    _flag(bench, '--modes', nargs='+', choices=MODES, help='Constructions to run')
    _flag(bench, '--test-size', type=int, help='Fresh draws for the test risk', dest='test_size')
    _flag(bench, '--master-seed', type=int, help='Master seed', dest='master_seed')
    _flag(bench, '--jobs', type=int, help='Worker processes')
    _flag(bench, '--out', help='Report CSV, stdout if omitted')
    _flag(bench, '--scaling', action='store_true', help='Run the runtime scaling study instead')

    curve = subparsers.add_parser('bound-curve', help='Decoder test risk against the generalisation bound')
    _flag(curve, '--n', type=int, help='Base dimension')
    _flag(curve, '--m', nargs='+', type=int, help='Training sizes')
    _flag(curve, '--seeds', type=int, help='Seeds per training size')
    _flag(curve, '--test-size', type=int, help='Fresh draws for the test risk', dest='test_size')
    _flag(curve, '--delta', type=float, help='Confidence parameter of the bound')
    _flag(curve, '--C', type=float, help='Bound constant', dest='C')
    _flag(curve, '--master-seed', type=int, help='Master seed', dest='master_seed')
    _flag(curve, '--jobs', type=int, help='Worker processes')
    _flag(curve, '--out', help='CSV file, stdout if omitted')

    for sub in subparsers.choices.values():
        _flag(sub, '--config', help='key=value file filling flags not given on the command line')
    parser.subcommands = subparsers.choices
    return parser


def _convert(action, value):
    if action.nargs == 0:
        return value.lower() in ('1', 'true', 'yes')
    if action.nargs != '+':
        values = [value]
    elif action.dest == 'grid':
        values = value.split()
    else:
        values = value.replace(',', ' ').split()
    if action.type is not None:
        values = [action.type(v) for v in values]
    if action.choices is not None and any(v not in action.choices for v in values):
        raise UsageError(f'invalid value \'{value}\' for {action.dest}')
    return values if action.nargs == '+' else values[0]


def apply_config_file(args, parser):
    """
    Merges a key=value file into the parsed flags. Keys fill flags that were not given; a key that contradicts a
    given flag and a key that names no flag of the subcommand are errors.
    """
    sub = parser.subcommands[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest not in ('help', 'config')}
    for line_no, line in enumerate(_read(args.config).splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, value = line.partition('=')
        key = key.strip().lstrip('-').replace('-', '_')
        if not sep:
            raise UsageError(f'{args.config}:{line_no}: expected key=value')
        if key not in actions:
            raise UsageError(f'{args.config}:{line_no}: unknown key \'{key}\' for {args.command}')
        try:
            converted = _convert(actions[key], value.strip())
        except ValueError:
            raise UsageError(f'{args.config}:{line_no}: invalid value for \'{key}\'') from None
        given = getattr(args, key)
        if given is not None and given != converted:
            raise UsageError(f'--{key} conflicts between command line ({given}) and {args.config} ({converted})')
        setattr(args, key, converted)


def _finish_args(args, parser):
    if args.config is not None:
        apply_config_file(args, parser)
    for key, value in DEFAULTS[args.command].items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    missing = [key for key in REQUIRED[args.command] if getattr(args, key) is None]
    if missing:
        raise UsageError(f'missing required flags: {", ".join("--" + k for k in missing)}')


def cmd_gen(args):
    seed = check_seed(args.seed)
    params = plant_params(args.mode, args.n, args.pos, seed, args.dist)
    dataset, witness = generate_dataset(params, args.m, calibration=args.calibration)
    _write(args.out, serialize_dataset(dataset))
    _write(args.witness, serialize_witness(witness))
    if args.verbose:
        print_dataset_info(dataset.info())
    print(f'mode={dataset.mode} n={dataset.n_base} ambient={dataset.ambient_dim} m={dataset.m} '
          f'positive_fraction={dataset.positive_fraction:.6f}')
    return EXIT_OK


def cmd_decode(args):
    dataset = parse_dataset(_read(args.data))
    witness = parse_witness(_read(args.witness)) if args.witness else None
    if args.verbose:
        print_dataset_info(dataset.info())

    start = time.perf_counter()
    h = multimodal_decode(dataset)
    wall_ms = (time.perf_counter() - start) * 1000.0
    _write(args.out, serialize_hypothesis(h, dataset.mode, dataset.n_base))
    print(f'train_risk={empirical_risk(h, dataset.X, dataset.Z):.6f} wall_ms={wall_ms:.3f}')

    if witness is not None:
        if (witness.params.mode, witness.params.n) != (dataset.mode, dataset.n_base):
            raise ValueError('witness does not describe the same construction as the dataset')
        deviation = np.max(np.abs(h.directions - witness.params.padded_directions()))
        print(f'max_direction_deviation={deviation:.3e}')
    return EXIT_OK


def cmd_baseline(args):
    dataset = parse_dataset(_read(args.data))
    options = {'k': args.k, 'restarts': args.restarts, 'iters': args.iters, 'passes': args.passes,
               'budget': args.budget, 'time_limit': args.time_limit}
    status, h = 'ok', None
    start = time.perf_counter()
    try:
        h = LEARNERS[args.learner](dataset, np.random.default_rng(check_seed(args.seed)), options)
    except BudgetExceededError as e:
        status, h = 'budget-exceeded', e.best
    wall_ms = (time.perf_counter() - start) * 1000.0

    train_risk = empirical_risk(h, dataset.X, dataset.Z) if h is not None else float('nan')
    if args.out and h is not None:
        _write(args.out, serialize_hypothesis(h, dataset.mode, dataset.n_base))
    print(f'learner={args.learner} status={status} train_risk={train_risk:.6f} wall_ms={wall_ms:.3f}')
    return EXIT_OK


def _first_bad_row(mask):
    return int(np.argmax(mask)) + 1


def verify_files(data_text, witness_text):
    """
    Runs the five verification checks in order and stops at the first failure.

    :returns:   list of names of passed checks
    :raises VerificationError:  naming the failed check
    """
    try:
        dataset = parse_dataset(data_text)
        witness = parse_witness(witness_text)
    except ParseError as e:
        raise VerificationError(f'format check failed: {e}') from None
    p = witness.params
    if (p.mode, p.n, p.seed) != (dataset.mode, dataset.n_base, dataset.seed):
        raise VerificationError('format check failed: dataset header does not match the witness (mode, n, seed)')
    passed = ['format']

    error = orthogonality_error(witness.Q)
    if error > VERIFY_TOL:
        raise VerificationError(f'orthogonality check failed: max |Q^T Q - I| = {error:.3e}')
    passed.append('orthogonality')

    padded = p.padded_directions()
    try:
        recovered = pad_directions(recover_directions(witness.Q, p.mode, p.n), p.ambient_dim)
    except CorruptedFingerprintError as e:
        raise VerificationError(f'fingerprint check failed: {e}') from None
    deviation = max(np.max(np.abs(recovered - padded)), np.max(np.abs(padded @ witness.Q.T - padded)))
    if deviation > VERIFY_TOL:
        raise VerificationError(f'fingerprint check failed: planted directions deviate by {deviation:.3e}')
    passed.append('fingerprint')

    scale = np.maximum(1.0, np.max(np.abs(dataset.X), axis=1))
    bad = np.max(np.abs(dataset.X @ witness.Q.T - dataset.Y), axis=1) > VERIFY_TOL * scale
    if np.any(bad):
        raise VerificationError(f'modality check failed at row {_first_bad_row(bad)}')
    passed.append('modality')

    bad = predict_many(witness.planted_hypothesis(), dataset.X) != dataset.Z
    if np.any(bad):
        raise VerificationError(f'realizability check failed at row {_first_bad_row(bad)}')
    passed.append('realizability')
    return passed


def cmd_verify(args):
    data_text, witness_text = _read(args.data), _read(args.witness)
    try:
        passed = verify_files(data_text, witness_text)
    except VerificationError as e:
        print(e)
        return EXIT_VERIFY
    for name in passed:
        print(f'{name:<14} ok')
    print(f'all checks passed ({len(passed)}/5)')
    return EXIT_OK


def cmd_bench(args):
    overrides = {'seeds': args.seeds, 'learners': args.learners, 'modes': args.modes, 'test_size': args.test_size,
                 'master_seed': args.master_seed, 'jobs': args.jobs}
    if args.grid:
        grid = parse_grid(args.grid)
        unknown = sorted(set(grid) - {'n', 'm'})
        if unknown:
            raise ValueError(f'unknown grid keys {unknown}, expected n and m')
        overrides['n_grid'] = grid.get('n')
        overrides['m_grid'] = grid.get('m')
    try:
        config = ExperimentConfig.from_yaml(**overrides)
    except KeyError as e:
        raise UsageError(f'Missing experiment config key: {e.args[0]}') from None
    target = args.out or sys.stdout

    if args.scaling:
        table = scaling_study(config.n_grid, m_rule=config.m_grid[0], master_seed=config.master_seed)
        table.to_csv(target, index=False, lineterminator='\n', float_format='%.6g')
        if len(table) >= 2:
            print(f'decoder_loglog_slope={loglog_slope(table["n"], table["decoder_ms"]):.3f}', file=sys.stderr)
        return EXIT_OK

    report = run_experiment(config)
    write_report_csv(report, target)
    collate_report(report, file=sys.stderr)
    return EXIT_OK


def cmd_bound_curve(args):
    curve = bound_curve(n=args.n, m_grid=args.m, seeds=args.seeds, test_size=args.test_size, delta=args.delta,
                        C=args.C, master_seed=args.master_seed, jobs=args.jobs)
    write_report_csv(curve[['m', 'seed', 'train_risk', 'test_risk', 'bound']], args.out or sys.stdout)
    print(f'C_fit={fit_bound_constant(curve, args.delta):.6g}', file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    'gen'        : cmd_gen,
    'decode'     : cmd_decode,
    'baseline'   : cmd_baseline,
    'verify'     : cmd_verify,
    'bench'      : cmd_bench,
    'bound-curve': cmd_bound_curve,
}


def main(argv=None):
    """
    Parses argv, runs the subcommand and maps failures onto the exit code contract.

    :param argv:    argument list without the program name, defaults to sys.argv[1:]
    :returns:       exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        _finish_args(args, parser)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f'error: {e}', file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except DecodeError as e:
        print(f'decode failure: {e}', file=sys.stderr)
        return EXIT_DECODE
    except ValueError as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f'I/O error: {e}', file=sys.stderr)
        return EXIT_IO


if __name__ == '__main__':
    sys.exit(main())

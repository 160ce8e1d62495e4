import time
from pathlib import Path

import numpy as np
import yaml

REPO_PATH = Path(__file__).resolve().parent.parent
CONFIG_PATH = REPO_PATH / 'config' / 'experiments.yaml'
U64 = 2 ** 64


def load_experiment_config(path=None):
    """
    Reads the experiment defaults from the YAML config of this repository.

    :param path:    optional path to a YAML file, defaults to config/experiments.yaml
    :returns:       dict of configuration values
    :raises KeyError:   if one of the required top-level sections is missing
    """
    with open(path or CONFIG_PATH, encoding='utf-8') as cnf:
        configs = yaml.safe_load(cnf) or dict()
    for key in ['experiment', 'learners', 'output']:
        if key not in configs:
            raise KeyError(key)
    return configs


def derive_seed(master_seed, *keys):
    """
    Derives an independent 64-bit seed from a master seed and a tuple of integer keys, e.g. (cell index, stream id).
    Identical inputs always give identical seeds.

    :param master_seed: non-negative integer
    :param keys:        non-negative integers identifying the stream
    :returns:           int in [0, 2**64)
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def make_rng(master_seed, *keys):
    """
    Generator for the stream identified by (master_seed, keys), see derive_seed.
    """
    return np.random.default_rng(derive_seed(master_seed, *keys))


def check_seed(seed):
    """
    :raises ValueError: if seed does not fit into an unsigned 64-bit integer
    """
    if not 0 <= int(seed) < U64:
        raise ValueError(f'Seed must be an unsigned 64-bit integer, got {seed}')
    return int(seed)


def time_call(fn, repeats=5, warmup=1):
    """
    Times repeated calls of fn with a monotonic clock, discarding warm-up calls.

    :param fn:      zero-argument callable
    :param repeats: number of timed calls
    :param warmup:  number of untimed calls before measuring
    :returns:       tuple of (median wall time in milliseconds, result of the last call)
    """
    result = None
    for _ in range(warmup):
        result = fn()
    times = list()
    for _ in range(max(repeats, 1)):
        start = time.perf_counter()
        result = fn()
        times.append((time.perf_counter() - start) * 1000.0)
    return float(np.median(times)), result


def parse_grid(tokens):
    """
    Parses grid tokens of the form 'n=2,4,8' and 'm=10x,500'. Sizes ending in 'x' are multiples of the ambient dimension.

    :param tokens:  list of 'key=v1,v2,...' strings
    :returns:       dict mapping key to list of values (int or str for multiples)
    :raises ValueError: on malformed tokens
    """
    grid = dict()
    for token in tokens:
        key, sep, values = token.partition('=')
        if not sep or not values:
            raise ValueError(f'Malformed grid token \'{token}\', expected key=v1,v2,...')
        parsed = list()
        for v in values.split(','):
            v = v.strip()
            if v.endswith('x'):
                int(v[:-1])
                parsed.append(v)
            else:
                parsed.append(int(v))
        grid[key.strip()] = parsed
    return grid


def resolve_m(m_spec, ambient_dim):
    """
    Turns an m grid entry into a sample count: integers are used as given, 'Kx' means K times the ambient dimension.
    """
    if isinstance(m_spec, str):
        if m_spec.endswith('x'):
            return int(m_spec[:-1]) * ambient_dim
        return int(m_spec)
    return int(m_spec)


def print_dataset_info(info):
    """
    Prints formatted dataset information for visual inspection.

    :param info: dict containing dataset information
    """
    print('\n\tData set information:\n\t{')
    for k, v in info.items():
        if hasattr(v, 'shape'):
            print('\t\t{:<17} : {},'.format(k, f'ndarray{tuple(v.shape)}'))
        elif isinstance(v, float):
            print(f'\t\t{k:<17} : {round(v, 6)},')
        else:
            print(f'\t\t{k:<17} : {v},')
    print('\t}\n')


def collate_report(report, file=None):
    """
    Prints mean and standard deviation of train/test risk and the median wall time per learner of a finished sweep.

    :param report:  pandas DataFrame with the experiment report columns
    :param file:    stream to print to, defaults to stdout
    """
    ok = report[report['status'] == 'ok']
    print('\nResults of experiment:', file=file)
    for learner, rows in ok.groupby('learner', sort=False):
        print(f'{learner:<12} runs {len(rows):3d}   '
              f'train risk {rows["train_risk"].mean():.5f} (± {rows["train_risk"].std(ddof=0):.5f})   '
              f'test risk {rows["test_risk"].mean():.5f} (± {rows["test_risk"].std(ddof=0):.5f})   '
              f'median wall {rows["wall_ms"].median():.3f} ms', file=file)
    failed = report[report['status'] != 'ok']
    if len(failed):
        print(f'{len(failed)} run(s) did not finish: {dict(failed["status"].value_counts())}', file=file)
    print('', file=file)

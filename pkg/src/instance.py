import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from linalg import as_unit_vector, orthogonal_completion, unit_sphere_sample

MODES = ('proper', 'improper')
DISTRIBUTIONS = ('gaussian', 'uniform')
CALIBRATIONS = ('independent', 'joint')
CALIBRATION_SIZE = 100_000
CALIBRATION_TOLERANCE = 0.02

DATASET_MAGIC = 'BIMODAL-HS v1'
WITNESS_MAGIC = 'WITNESS v1'
HYPOTHESIS_MAGIC = 'HYPOTHESIS v1'


class ParseError(ValueError):
    """
    Malformed dataset, witness or hypothesis text. The message starts with the 1-based line number.
    """

    def __init__(self, line, message):
        super().__init__(f'line {line}: {message}')
        self.line = line


def perfect_square_root(n):
    """
    :returns: integer p with p * p == n
    :raises ValueError: if n is not a perfect square
    """
    p = math.isqrt(n) if n >= 0 else -1
    if p < 0 or p * p != n:
        raise ValueError('n must be a perfect square')
    return p


@dataclass(frozen=True, eq=False)
class Halfspace:
    """
    Closed halfspace {x | r^T x <= c} with unit direction r.
    """
    r: np.ndarray
    c: float

    def __post_init__(self):
        object.__setattr__(self, 'r', as_unit_vector(self.r))
        object.__setattr__(self, 'c', float(self.c))


@dataclass(frozen=True, eq=False)
class Hypothesis:
    """
    Intersection of k >= 1 halfspaces, h(x) = sgn(min_j(c_j - r_j^T x)) with sgn(0) = +1.
    """
    halfspaces: tuple

    def __post_init__(self):
        halfspaces = tuple(self.halfspaces)
        if not halfspaces:
            raise ValueError('Hypothesis needs at least one halfspace')
        if len({hs.r.size for hs in halfspaces}) != 1:
            raise ValueError('All halfspaces of a hypothesis must share one dimension')
        object.__setattr__(self, 'halfspaces', halfspaces)

    @classmethod
    def from_arrays(cls, directions, thresholds):
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
        if len(directions) != len(thresholds):
            raise ValueError(f'{len(directions)} directions but {len(thresholds)} thresholds')
        return cls(tuple(Halfspace(r, c) for r, c in zip(directions, thresholds)))

    @property
    def k(self):
        return len(self.halfspaces)

    @property
    def dim(self):
        return self.halfspaces[0].r.size

    @property
    def directions(self):
        return np.stack([hs.r for hs in self.halfspaces])

    @property
    def thresholds(self):
        return np.array([hs.c for hs in self.halfspaces])

    def __eq__(self, other):
        if not isinstance(other, Hypothesis):
            return NotImplemented
        return (self.k == other.k and self.dim == other.dim
                and np.array_equal(self.directions, other.directions)
                and np.array_equal(self.thresholds, other.thresholds))


def predict_many(h, X):
    """
    Labels every row of X with hypothesis h.

    :param h:   Hypothesis
    :param X:   ndarray (m, d)
    :returns:   ndarray(int) of +1/-1 labels
    :raises ValueError: on dimension mismatch
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != h.dim:
        raise ValueError(f'Hypothesis has dimension {h.dim}, points have dimension {X.shape[1]}')
    margins = h.thresholds[np.newaxis, :] - X @ h.directions.T
    return np.where(np.min(margins, axis=1) >= 0, 1, -1)


def predict(h, x):
    """
    Labels a single point: +1 iff r_j^T x <= c_j for every halfspace j (boundary counts as inside), -1 otherwise.

    :raises ValueError: on dimension mismatch
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError('predict expects a single vector, use predict_many for batches')
    return int(predict_many(h, x[np.newaxis, :])[0])


@dataclass(frozen=True, eq=False)
class InstanceParams:
    """
    Hidden concept plus sampling configuration.

    proper:   ambient dimension 3n, two directions in R^n, labels depend on the first n coordinates.
    improper: ambient dimension n (a perfect square), sqrt(n)-1 directions in R^sqrt(n), labels depend on the first
              sqrt(n) coordinates.
    """
    mode: str
    n: int
    directions: tuple
    thresholds: tuple = None
    positive_target: float = 0.5
    seed: int = 0
    distribution: str = 'gaussian'

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f'Unknown mode \'{self.mode}\', expected one of {MODES}')
        if int(self.n) < 1:
            raise ValueError(f'Base dimension must be positive, got {self.n}')
        object.__setattr__(self, 'n', int(self.n))
        if self.mode == 'improper' and perfect_square_root(self.n) < 2:
            raise ValueError('improper mode needs n >= 4')
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f'Unknown distribution \'{self.distribution}\', expected one of {DISTRIBUTIONS}')
        if not 0.0 < self.positive_target < 1.0:
            raise ValueError(f'positive_target must lie in (0, 1), got {self.positive_target}')
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError(f'Seed must be an unsigned 64-bit integer, got {self.seed}')

        directions = tuple(as_unit_vector(r) for r in self.directions)
        if len(directions) != self.k:
            raise ValueError(f'{self.mode} mode with n={self.n} needs {self.k} directions, got {len(directions)}')
        for r in directions:
            if r.size != self.label_dim:
                raise ValueError(f'Directions must have dimension {self.label_dim}, got {r.size}')
        object.__setattr__(self, 'directions', directions)

        if self.thresholds is not None:
            thresholds = tuple(float(c) for c in self.thresholds)
            if len(thresholds) != self.k:
                raise ValueError(f'Expected {self.k} thresholds, got {len(thresholds)}')
            if not all(np.isfinite(thresholds)):
                raise ValueError('Thresholds must be finite')
            object.__setattr__(self, 'thresholds', thresholds)

    @property
    def label_dim(self):
        """number of leading coordinates the labels depend on"""
        return self.n if self.mode == 'proper' else perfect_square_root(self.n)

    @property
    def ambient_dim(self):
        return 3 * self.n if self.mode == 'proper' else self.n

    @property
    def k(self):
        return 2 if self.mode == 'proper' else perfect_square_root(self.n) - 1

    def padded_directions(self):
        """directions embedded into the ambient space, r_hat_j = (r_j, 0)"""
        padded = np.zeros((self.k, self.ambient_dim))
        padded[:, :self.label_dim] = np.stack(self.directions)
        return padded

    def planted_hypothesis(self):
        if self.thresholds is None:
            raise ValueError('Thresholds are not set, generate or calibrate first')
        return Hypothesis.from_arrays(self.padded_directions(), self.thresholds)


def plant_params(mode, n, positive_target=0.5, seed=0, distribution='gaussian', thresholds=None):
    """
    Samples hidden unit directions for a new instance from the params seed.

    :param mode:            'proper' or 'improper'
    :param n:               base dimension (perfect square for improper)
    :param positive_target: wanted fraction of positive points in (0, 1)
    :param seed:            unsigned 64-bit seed, also used later by generate_dataset
    :param distribution:    sampling distribution of x, 'gaussian' or 'uniform'
    :param thresholds:      optional fixed thresholds, calibrated at generation time otherwise
    :returns:               InstanceParams
    """
    if mode not in MODES:
        raise ValueError(f'Unknown mode \'{mode}\', expected one of {MODES}')
    if mode == 'improper':
        p = perfect_square_root(n)
        dim, k = p, p - 1
    else:
        dim, k = n, 2
    rng = np.random.default_rng([int(seed), 1])
    directions = tuple(unit_sphere_sample(rng, dim) for _ in range(max(k, 0)))
    return InstanceParams(mode, n, directions, thresholds, positive_target, seed, distribution)


def build_Q_proper(r1, r2):
    """
    Fingerprint matrix of the proper construction, Q = diag(I_n, F) where F is the orthogonal completion of the
    stacked column (r1/sqrt(2), r2/sqrt(2)).

    :param r1:  unit vector of dimension n
    :param r2:  unit vector of dimension n
    :returns:   ndarray (3n, 3n), orthogonal
    :raises ValueError: on non-unit input or dimension mismatch
    """
    r1, r2 = as_unit_vector(r1), as_unit_vector(r2)
    if r1.size != r2.size:
        raise ValueError(f'Directions differ in dimension ({r1.size} vs {r2.size})')
    n = r1.size
    Q = np.eye(3 * n)
    Q[n:, n:] = orthogonal_completion(np.concatenate([r1, r2]) / np.sqrt(2.0))
    return Q


def build_Q_improper(directions, n=None):
    """
    Fingerprint matrix of the improper construction, Q = diag(I_p, F) with p = sqrt(n), where F is the orthogonal
    completion of the p-1 stacked directions, each scaled by 1/sqrt(p-1).

    :param directions:  p-1 unit vectors of dimension p, p >= 2
    :param n:           optional ambient dimension, checked against the directions
    :returns:           ndarray (n, n), orthogonal
    :raises ValueError: if n is not a perfect square or the directions do not match it
    """
    directions = [as_unit_vector(v) for v in directions]
    if not directions:
        raise ValueError('improper construction needs at least one direction')
    p = directions[0].size
    if n is not None:
        if perfect_square_root(n) != p:
            raise ValueError(f'Directions have dimension {p}, expected sqrt(n) = {perfect_square_root(n)}')
    if p < 2:
        raise ValueError('improper construction needs sqrt(n) >= 2')
    if len(directions) != p - 1:
        raise ValueError(f'Expected {p - 1} directions of dimension {p}, got {len(directions)}')
    if any(v.size != p for v in directions):
        raise ValueError(f'All directions must have dimension {p}')
    Q = np.eye(p * p)
    Q[p:, p:] = orthogonal_completion(np.concatenate(directions) / np.sqrt(p - 1))
    return Q


def build_Q(params):
    if params.mode == 'proper':
        return build_Q_proper(*params.directions)
    return build_Q_improper(params.directions, params.n)


def sample_points(rng, m, d, distribution='gaussian'):
    """
    i.i.d. draws of x, standard Gaussian or uniform on [-1, 1]^d. Both are non-degenerate: any d draws are linearly
    independent with probability 1.
    """
    if distribution == 'gaussian':
        return rng.standard_normal((m, d))
    if distribution == 'uniform':
        return rng.uniform(-1.0, 1.0, size=(m, d))
    raise ValueError(f'Unknown distribution \'{distribution}\'')


def _joint_quantiles(projections, target):
    low, high = target, 1.0
    for _ in range(60):
        q = 0.5 * (low + high)
        rate = np.mean(np.all(projections <= np.quantile(projections, q, axis=0), axis=1))
        if rate < target:
            low = q
        else:
            high = q
    return np.quantile(projections, high, axis=0)


def calibrate_thresholds(params, rng=None, calibration_size=CALIBRATION_SIZE, method='independent'):
    """
    Chooses thresholds so that roughly a positive_target fraction of points is positive. Only the first label_dim
    coordinates are drawn since the projections onto the padded directions depend on nothing else.

    independent: c_j is the q-th empirical quantile of r_j^T x with q = positive_target ** (1/k). Correlated
                 directions can push the joint rate far off the target (r_2 = -r_1 gives an empty positive set),
                 so when the rate on the calibration draw misses by more than CALIBRATION_TOLERANCE the joint
                 rule is used instead.
    joint:       one common quantile level q is found by bisection so that the joint acceptance of the calibration
                 draw equals positive_target.

    :param params:              InstanceParams
    :param rng:                 numpy Generator, seed or None
    :param calibration_size:    size of the calibration draw
    :param method:              'independent' or 'joint'
    :returns:                   tuple of k thresholds
    """
    if method not in CALIBRATIONS:
        raise ValueError(f'Unknown calibration method \'{method}\', expected one of {CALIBRATIONS}')
    rng = np.random.default_rng(rng)
    target = params.positive_target
    X_cal = sample_points(rng, calibration_size, params.label_dim, params.distribution)
    projections = X_cal @ np.stack(params.directions).T

    if method == 'joint':
        thresholds = _joint_quantiles(projections, target)
    else:
        thresholds = np.quantile(projections, target ** (1.0 / params.k), axis=0)
        rate = np.mean(np.all(projections <= thresholds, axis=1))
        if abs(rate - target) > CALIBRATION_TOLERANCE:
            thresholds = _joint_quantiles(projections, target)

    rate = np.mean(np.all(projections <= thresholds, axis=1))
    if rate in (0.0, 1.0):
        warnings.warn(f'Calibration draw has only one class (positive rate {rate})')
    return tuple(float(c) for c in thresholds)


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    m rows of (x, y, z) stored column-wise: X and Y are (m, ambient_dim), Z holds +1/-1 labels.
    """
    mode: str
    n_base: int
    ambient_dim: int
    seed: int
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        Z = np.asarray(self.Z, dtype=int).ravel()
        for name, A in (('x', X), ('y', Y)):
            if A.ndim != 2 or A.shape[1] != self.ambient_dim:
                raise ValueError(f'{name} rows must form an (m, {self.ambient_dim}) array, got shape {A.shape}')
        if not len(X) == len(Y) == len(Z):
            raise ValueError(f'Row counts differ (x {len(X)}, y {len(Y)}, z {len(Z)})')
        if not np.all(np.isin(Z, (-1, 1))):
            raise ValueError('Labels must be +1 or -1')
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'Y', Y)
        object.__setattr__(self, 'Z', Z)

    @property
    def m(self):
        return len(self.Z)

    @property
    def positive_fraction(self):
        return float(np.mean(self.Z == 1)) if self.m else 0.0

    def positives(self):
        """X_+, the x rows labelled +1"""
        return self.X[self.Z == 1]

    def info(self):
        return {
            'mode'             : self.mode,
            'n_base'           : self.n_base,
            'ambient_dim'      : self.ambient_dim,
            'm'                : self.m,
            'seed'             : self.seed,
            'positive_fraction': self.positive_fraction,
            'X'                : self.X,
            'Y'                : self.Y,
        }

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return ((self.mode, self.n_base, self.ambient_dim, self.seed)
                == (other.mode, other.n_base, other.ambient_dim, other.seed)
                and np.array_equal(self.X, other.X) and np.array_equal(self.Y, other.Y)
                and np.array_equal(self.Z, other.Z))


@dataclass(frozen=True, eq=False)
class Witness:
    """
    Hidden parameters of a generated dataset (with thresholds set) and its fingerprint matrix Q.
    """
    params: InstanceParams
    Q: np.ndarray = field(repr=False)

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        d = self.params.ambient_dim
        if Q.shape != (d, d):
            raise ValueError(f'Q must be {d}x{d}, got {Q.shape}')
        object.__setattr__(self, 'Q', Q)

    def planted_hypothesis(self):
        return self.params.planted_hypothesis()

    def y_modality_hypothesis(self):
        """the planted concept on the second modality, r_tilde_j = Q r_hat_j with unchanged thresholds"""
        rotated = self.params.padded_directions() @ self.Q.T
        rotated /= np.linalg.norm(rotated, axis=1, keepdims=True)
        return Hypothesis.from_arrays(rotated, self.params.thresholds)

    def __eq__(self, other):
        if not isinstance(other, Witness):
            return NotImplemented
        a, b = self.params, other.params
        return ((a.mode, a.n, a.seed, a.positive_target, a.distribution, a.thresholds)
                == (b.mode, b.n, b.seed, b.positive_target, b.distribution, b.thresholds)
                and all(np.array_equal(u, v) for u, v in zip(a.directions, b.directions))
                and np.array_equal(self.Q, other.Q))


def generate_dataset(params, m, rng=None, calibration_size=CALIBRATION_SIZE, calibration='independent'):
    """
    Samples a bimodal dataset from a planted concept. x is drawn i.i.d. from the params distribution, z is the
    planted label of x and y = Q x. Missing thresholds are calibrated from the same stream before the data is drawn.

    :param params:              InstanceParams, thresholds may be None
    :param m:                   number of rows, m >= 1
    :param rng:                 numpy Generator, seed or None (None uses params.seed)
    :param calibration_size:    size of the threshold calibration draw
    :param calibration:         'independent' or 'joint', see calibrate_thresholds
    :returns:                   tuple of (Dataset, Witness)
    :raises ValueError:         if m < 1
    """
    if int(m) < 1:
        raise ValueError(f'Need at least one row, got m={m}')
    rng = np.random.default_rng(params.seed if rng is None else rng)
    if params.thresholds is None:
        params = replace(params, thresholds=calibrate_thresholds(params, rng, calibration_size, calibration))
    Q = build_Q(params)
    X = sample_points(rng, int(m), params.ambient_dim, params.distribution)
    Z = predict_many(params.planted_hypothesis(), X)
    Y = X @ Q.T
    dataset = Dataset(params.mode, params.n, params.ambient_dim, int(params.seed), X, Y, Z)
    return dataset, Witness(params, Q)


def _fmt(values):
    return ' '.join(repr(float(v)) for v in values)


def _parse_floats(tokens, line_no, expected=None):
    if expected is not None and len(tokens) != expected:
        raise ParseError(line_no, f'expected {expected} numbers, found {len(tokens)}')
    try:
        values = np.array([float(t) for t in tokens], dtype=float)
    except ValueError as e:
        raise ParseError(line_no, f'not a number ({e})') from None
    if not np.all(np.isfinite(values)):
        raise ParseError(line_no, 'non-finite number')
    return values


def _parse_header(line, line_no, keys):
    fields = dict()
    for token in line.split():
        key, sep, value = token.partition('=')
        if not sep:
            raise ParseError(line_no, f'malformed header field \'{token}\'')
        fields[key] = value
    if sorted(fields) != sorted(keys):
        raise ParseError(line_no, f'header must have fields {" ".join(keys)}')
    return fields


def _header_int(fields, key, line_no):
    try:
        return int(fields[key])
    except ValueError:
        raise ParseError(line_no, f'{key} must be an integer, got \'{fields[key]}\'') from None


def _split_lines(text):
    lines = text.split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    return lines


def serialize_dataset(d):
    """
    Dataset file text: magic line, header line, then one 'x | y | z' row per data point.
    """
    lines = [DATASET_MAGIC, f'mode={d.mode} n={d.n_base} ambient={d.ambient_dim} m={d.m} seed={d.seed}']
    for x, y, z in zip(d.X, d.Y, d.Z):
        lines.append(f'{_fmt(x)} | {_fmt(y)} | {"+1" if z == 1 else "-1"}')
    return '\n'.join(lines) + '\n'


def parse_dataset(text):
    """
    Parses dataset file text produced by serialize_dataset.

    :param text:    file content
    :returns:       Dataset
    :raises ParseError: on malformed header, row-length mismatch, non-finite numbers or a wrong row count
    """
    lines = _split_lines(text)
    if not lines or lines[0] != DATASET_MAGIC:
        raise ParseError(1, f'expected \'{DATASET_MAGIC}\'')
    if len(lines) < 2:
        raise ParseError(2, 'missing header line')
    fields = _parse_header(lines[1], 2, ['mode', 'n', 'ambient', 'm', 'seed'])
    mode = fields['mode']
    if mode not in MODES:
        raise ParseError(2, f'unknown mode \'{mode}\'')
    n, d, m, seed = (_header_int(fields, key, 2) for key in ['n', 'ambient', 'm', 'seed'])
    if n < 1 or m < 0 or not 0 <= seed < 2 ** 64:
        raise ParseError(2, 'header values out of range')
    expected_d = 3 * n if mode == 'proper' else n
    if d != expected_d:
        raise ParseError(2, f'ambient={d} does not match {mode} mode with n={n} (expected {expected_d})')

    rows = lines[2:]
    if len(rows) < m:
        raise ParseError(len(rows) + 3, f'expected {m} rows, found {len(rows)}')
    if len(rows) > m:
        raise ParseError(m + 3, f'unexpected row beyond the declared m={m}')

    X, Y, Z = np.zeros((m, d)), np.zeros((m, d)), np.zeros(m, dtype=int)
    for i, row in enumerate(rows):
        line_no = i + 3
        parts = row.split(' | ')
        if len(parts) != 3:
            raise ParseError(line_no, 'row must have the form \'x | y | z\'')
        X[i] = _parse_floats(parts[0].split(), line_no, d)
        Y[i] = _parse_floats(parts[1].split(), line_no, d)
        label = parts[2].strip()
        if label not in ('+1', '-1'):
            raise ParseError(line_no, f'label must be +1 or -1, got \'{label}\'')
        Z[i] = 1 if label == '+1' else -1
    return Dataset(mode, n, d, seed, X, Y, Z)


def _halfspace_lines(directions, thresholds):
    lines = list()
    for j, (r, c) in enumerate(zip(directions, thresholds), start=1):
        lines.append(f'r {j}: {_fmt(r)}')
        lines.append(f'c {j}: {repr(float(c))}')
    return lines


def _parse_halfspace_lines(lines, first_line_no, k, dim):
    directions, thresholds = list(), list()
    for j in range(1, k + 1):
        for kind in ('r', 'c'):
            idx = 2 * (j - 1) + (kind == 'c')
            line_no = first_line_no + idx
            if idx >= len(lines):
                raise ParseError(line_no, f'missing \'{kind} {j}:\' line')
            prefix = f'{kind} {j}:'
            if not lines[idx].startswith(prefix):
                raise ParseError(line_no, f'expected \'{prefix}\'')
            tokens = lines[idx][len(prefix):].split()
            if kind == 'r':
                directions.append(_parse_floats(tokens, line_no, dim))
            else:
                thresholds.append(float(_parse_floats(tokens, line_no, 1)[0]))
    return directions, thresholds


def serialize_witness(w):
    """
    Witness file text: header, r/c lines per halfspace (unpadded directions), then Q row by row.
    """
    p = w.params
    lines = [WITNESS_MAGIC,
             f'mode={p.mode} n={p.n} k={p.k} seed={p.seed} pos={repr(float(p.positive_target))} dist={p.distribution}']
    lines += _halfspace_lines(p.directions, p.thresholds)
    lines.append('Q:')
    lines += [_fmt(row) for row in w.Q]
    return '\n'.join(lines) + '\n'


def parse_witness(text):
    """
    Parses witness file text produced by serialize_witness. Q is read as stored, its orthogonality is not checked here.

    :raises ParseError: on malformed content
    """
    lines = _split_lines(text)
    if not lines or lines[0] != WITNESS_MAGIC:
        raise ParseError(1, f'expected \'{WITNESS_MAGIC}\'')
    if len(lines) < 2:
        raise ParseError(2, 'missing header line')
    fields = _parse_header(lines[1], 2, ['mode', 'n', 'k', 'seed', 'pos', 'dist'])
    mode = fields['mode']
    if mode not in MODES:
        raise ParseError(2, f'unknown mode \'{mode}\'')
    n, k, seed = (_header_int(fields, key, 2) for key in ['n', 'k', 'seed'])
    pos = _parse_floats([fields['pos']], 2, 1)[0]
    try:
        label_dim = n if mode == 'proper' else perfect_square_root(n)
    except ValueError as e:
        raise ParseError(2, str(e)) from None
    d = 3 * n if mode == 'proper' else n

    directions, thresholds = _parse_halfspace_lines(lines[2:], 3, k, label_dim)
    q_line = 3 + 2 * k
    if len(lines) < q_line or lines[q_line - 1] != 'Q:':
        raise ParseError(q_line, 'expected \'Q:\'')
    q_rows = lines[q_line:]
    if len(q_rows) != d:
        raise ParseError(q_line + 1 + min(len(q_rows), d), f'expected {d} rows of Q, found {len(q_rows)}')
    Q = np.stack([_parse_floats(row.split(), q_line + 1 + i, d) for i, row in enumerate(q_rows)])

    try:
        params = InstanceParams(mode, n, tuple(directions), tuple(thresholds), pos, seed, fields['dist'])
    except ValueError as e:
        raise ParseError(2, str(e)) from None
    return Witness(params, Q)


def serialize_hypothesis(h, mode, n_base):
    """
    Hypothesis file text: witness-style halfspaces over the ambient space, without Q.
    """
    lines = [HYPOTHESIS_MAGIC, f'mode={mode} n={n_base} k={h.k} ambient={h.dim}']
    lines += _halfspace_lines(h.directions, h.thresholds)
    return '\n'.join(lines) + '\n'


def parse_hypothesis(text):
    """
    :returns:   tuple of (Hypothesis, mode, n_base)
    :raises ParseError: on malformed content
    """
    lines = _split_lines(text)
    if not lines or lines[0] != HYPOTHESIS_MAGIC:
        raise ParseError(1, f'expected \'{HYPOTHESIS_MAGIC}\'')
    if len(lines) < 2:
        raise ParseError(2, 'missing header line')
    fields = _parse_header(lines[1], 2, ['mode', 'n', 'k', 'ambient'])
    n, k, d = (_header_int(fields, key, 2) for key in ['n', 'k', 'ambient'])
    if k < 1 or d < 1:
        raise ParseError(2, 'k and ambient must be positive')
    directions, thresholds = _parse_halfspace_lines(lines[2:], 3, k, d)
    if len(lines) > 2 + 2 * k:
        raise ParseError(3 + 2 * k, 'unexpected trailing content')
    try:
        h = Hypothesis.from_arrays(directions, thresholds)
    except ValueError as e:
        raise ParseError(3, str(e)) from None
    return h, fields['mode'], n

import itertools
import time
import warnings
from math import comb

import numpy as np

from instance import Hypothesis, perfect_square_root
from linalg import (InsufficientRankError, select_independent_subset,
                    solve_linear_map, unit_sphere_sample)

NORM_GATE = 1e-6
SEPARATION = 1e-6
DEFAULT_BUDGET = 10_000_000


class DecodeError(RuntimeError):
    """
    The multimodal decoder could not recover the fingerprint matrix.

    :param message: description of the failure
    :param rank:    rank reached by the x rows, None if the failure is not rank related
    """

    def __init__(self, message, rank=None):
        super().__init__(message)
        self.rank = rank


class CorruptedFingerprintError(DecodeError):
    """
    The recovered matrix does not carry unit directions where the construction places them.
    """


class BudgetExceededError(RuntimeError):
    """
    Exhaustive search stopped by its evaluation or time budget.

    :param message:     description
    :param best:        best Hypothesis found so far, or None
    :param evaluations: number of hypotheses scored before stopping
    :param reason:      'evaluations' when the evaluation budget ran out, 'time' when the time limit did
    """

    def __init__(self, message, best=None, evaluations=0, reason='evaluations'):
        super().__init__(message)
        self.best = best
        self.evaluations = evaluations
        self.reason = reason


def _check_xz(X, Z):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.asarray(Z, dtype=int).ravel()
    if len(X) != len(Z):
        raise ValueError(f'{len(X)} points but {len(Z)} labels')
    if len(Z) == 0:
        raise ValueError('Need at least one labelled point')
    return X, Z


def _error_count(directions, thresholds, X, positive):
    inside = np.all(X @ directions.T <= thresholds, axis=1)
    return int(np.sum(inside != positive))


def all_negative_hypothesis(X, directions):
    """
    Hypothesis with the given directions that rejects every row of X: c_j = min_i r_j^T x_i - 1.
    """
    directions = np.atleast_2d(directions)
    if len(X) == 0:
        return Hypothesis.from_arrays(directions, -np.ones(len(directions)))
    return Hypothesis.from_arrays(directions, np.min(X @ directions.T, axis=0) - 1.0)


def _axis(d, a=0, sign=1.0):
    e = np.zeros(d)
    e[a] = sign
    return e


# multimodal decoder

def recover_fingerprint(dataset):
    """
    Steps one and two of the decoder: picks ambient_dim linearly independent x rows in stream order and solves
    Q x_i = y_i on them.

    :param dataset: Dataset with both modalities
    :returns:       ndarray (d, d), the recovered Q
    :raises ValueError:     if m < ambient_dim
    :raises DecodeError:    if the x rows do not reach full rank
    """
    d = dataset.ambient_dim
    if dataset.m < d:
        raise ValueError(f'Decoding needs m >= ambient dimension ({dataset.m} < {d})')
    try:
        indices = select_independent_subset(dataset.X, d)
        return solve_linear_map(dataset.X[indices], dataset.Y[indices])
    except InsufficientRankError as e:
        raise DecodeError(f'x rows reach rank {e.rank} of the required {d}', rank=e.rank) from e


def recover_directions(Q, mode, n_base):
    """
    Reads the planted directions from the first column of the fingerprint block and rescales them.

    proper:   column n, r_1 = sqrt(2) * rows n..2n-1, r_2 = sqrt(2) * rows 2n..3n-1
    improper: column p = sqrt(n), r_j = sqrt(p-1) * rows p + (j-1)p .. p + jp - 1

    :param Q:       recovered fingerprint matrix
    :param mode:    'proper' or 'improper'
    :param n_base:  base dimension n
    :returns:       list of unit vectors (unpadded)
    :raises CorruptedFingerprintError: if an extracted direction is off unit norm by more than 1e-6
    """
    Q = np.asarray(Q, dtype=float)
    if mode == 'proper':
        p, k, scale, d = n_base, 2, np.sqrt(2.0), 3 * n_base
    elif mode == 'improper':
        p = perfect_square_root(n_base)
        k, scale, d = p - 1, np.sqrt(p - 1.0), n_base
    else:
        raise ValueError(f'Unknown mode \'{mode}\'')
    if Q.shape != (d, d):
        raise ValueError(f'{mode} mode with n={n_base} needs a {d}x{d} matrix, got {Q.shape}')

    column = Q[:, p]
    directions = list()
    for j in range(k):
        r = scale * column[p + j * p: p + (j + 1) * p]
        norm = np.linalg.norm(r)
        if abs(norm - 1.0) > NORM_GATE:
            raise CorruptedFingerprintError(
                f'direction {j + 1} has norm {norm:.6g} after extraction, data is not from the fingerprint construction')
        directions.append(r / norm)
    return directions


def pad_directions(directions, ambient_dim):
    """embeds directions of the label block into the ambient space, (r_j, 0)"""
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    padded = np.zeros((len(directions), ambient_dim))
    padded[:, :directions.shape[1]] = directions
    return padded


def fit_thresholds(X, Z, directions):
    """
    c_j = max over positive rows of r_j^T x. Without positive rows the all-negative thresholds are returned instead
    (min over all rows minus one), which reject every training row.

    :param X:           ndarray (m, d)
    :param Z:           labels +1/-1
    :param directions:  ndarray (k, d) of unit directions in the ambient space
    :returns:           ndarray (k,) of thresholds
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.asarray(Z).ravel()
    directions = np.atleast_2d(directions)
    positives = X[Z == 1]
    if len(positives) == 0:
        return all_negative_hypothesis(X, directions).thresholds
    return np.max(positives @ directions.T, axis=0)


def multimodal_decode(dataset):
    """
    Learning by decoding: recover Q from matched (x, y) pairs, read the planted directions off Q, then fit thresholds
    on the positive x rows. The result is a hypothesis over x only.

    :param dataset: Dataset with m >= ambient_dim
    :returns:       Hypothesis with 2 (proper) or sqrt(n)-1 (improper) halfspaces
    :raises ValueError:                 if m < ambient_dim
    :raises DecodeError:                if the x rows are rank deficient
    :raises CorruptedFingerprintError:  if the data was not generated by the fingerprint construction
    """
    Q = recover_fingerprint(dataset)
    directions = pad_directions(recover_directions(Q, dataset.mode, dataset.n_base), dataset.ambient_dim)
    return Hypothesis.from_arrays(directions, fit_thresholds(dataset.X, dataset.Z, directions))


# unimodal baselines

class _SearchBudget:

    def __init__(self, max_evaluations, time_limit):
        self.max_evaluations = max_evaluations
        self.time_limit = time_limit
        self.start = time.perf_counter()
        self.evaluations = 0
        self.exhausted = None

    def spend(self, amount):
        self.evaluations += amount
        if self.max_evaluations is not None and self.evaluations > self.max_evaluations:
            self.exhausted = 'evaluations'
            return False
        if self.time_limit is not None and time.perf_counter() - self.start > self.time_limit:
            self.exhausted = 'time'
            return False
        return True


def _fallback_candidates(X, eps):
    """constant halfspaces plus axis-aligned halfspaces through every point coordinate"""
    m, d = X.shape
    directions = [_axis(d), _axis(d)]
    thresholds = [np.max(X[:, 0]) + 1.0, np.min(X[:, 0]) - 1.0]
    for a in range(d):
        for sign in (1.0, -1.0):
            for i in range(m):
                for e in (eps, -eps):
                    directions.append(_axis(d, a, sign))
                    thresholds.append(sign * X[i, a] + e)
    return directions, thresholds


def _subset_candidates(X, eps, budget):
    """halfspaces whose boundary passes through d of the points, both orientations, threshold shifted by +-eps"""
    m, d = X.shape
    directions, thresholds = list(), list()
    for count, subset in enumerate(itertools.combinations(range(m), d)):
        if count % 256 == 0 and not budget.spend(0):
            break
        P = X[list(subset)]
        if d == 1:
            normal = np.ones(1)
        else:
            q, r = np.linalg.qr((P[1:] - P[0]).T, mode='complete')
            if np.min(np.abs(np.diag(r))) <= 1e-12 * max(1.0, np.max(np.abs(P))):
                continue
            normal = q[:, -1]
        offset = normal @ P[0]
        for sign in (1.0, -1.0):
            for e in (eps, -eps):
                directions.append(sign * normal)
                thresholds.append(sign * offset + e)
    return directions, thresholds


def _best_pair(inside, positive, budget):
    """exhaustive scan over unordered pairs (a, b), a <= b, of candidate membership rows"""
    best = (np.inf, None, None)
    for a in range(len(inside)):
        errors = np.sum((inside[a] & inside[a:]) != positive, axis=1)
        b = int(np.argmin(errors))
        if errors[b] < best[0]:
            best = (int(errors[b]), a, a + b)
        if not budget.spend(len(inside) - a):
            return best, False
    return best, True


def brute_force_erm(X, Z, k=2, budget=DEFAULT_BUDGET, time_limit=None):
    """
    Exact empirical risk minimisation over a finite candidate family of halfspaces: every hyperplane through d of the
    input points (both orientations, threshold moved by +-eps so the points fall on either side), axis-aligned
    halfspaces through every point coordinate and the two constant halfspaces. For k = 2 all pairs are scanned.
    eps is 1e-6 times the data scale. Exact only over this family.

    :param X:           ndarray (m, d), meant for tiny sizes (d <= 4, m <= 16)
    :param Z:           labels +1/-1
    :param k:           1 or 2 halfspaces
    :param budget:      maximal number of scored hypotheses, None for unlimited
    :param time_limit:  optional wall time limit in seconds
    :returns:           Hypothesis minimising training 0-1 risk over the family
    :raises BudgetExceededError: when the budget runs out, with the best hypothesis so far attached
    """
    X, Z = _check_xz(X, Z)
    if k not in (1, 2):
        raise ValueError(f'brute_force_erm supports k in (1, 2), got {k}')
    m, d = X.shape
    positive = Z == 1
    eps = SEPARATION * max(float(np.max(np.abs(X))), 1.0)
    search = _SearchBudget(budget, time_limit)

    def _planned(count):
        return count if k == 1 else count + count * (count + 1) // 2

    n_fallback = 4 * d * m + 2
    planned = _planned(n_fallback + 4 * comb(m, d))
    if budget is not None and _planned(n_fallback) > budget:
        warnings.warn(f'brute force skipped, {planned} evaluations planned with a budget of {budget}')
        raise BudgetExceededError(f'search budget exceeded before any candidate was scored ({planned} planned, '
                                  f'budget {budget})', best=None, evaluations=0)

    directions, thresholds = _fallback_candidates(X, eps)
    complete = budget is None or planned <= budget
    if complete:
        extra_directions, extra_thresholds = _subset_candidates(X, eps, search)
        directions += extra_directions
        thresholds += extra_thresholds
        complete = search.spend(0)

    R, c = np.stack(directions), np.array(thresholds)
    inside = (X @ R.T <= c).T
    search.spend(len(R))
    if k == 1:
        errors = np.sum(inside != positive, axis=1)
        a = int(np.argmin(errors))
        best_h = Hypothesis.from_arrays(R[a], c[a])
    else:
        (_, a, b), finished = _best_pair(inside, positive, search)
        complete = complete and finished
        best_h = Hypothesis.from_arrays(R[[a, b]], c[[a, b]])

    if not complete:
        warnings.warn(f'brute force stopped after {search.evaluations} evaluations ({planned} planned)')
        raise BudgetExceededError(
            f'search budget exceeded ({planned} evaluations planned, budget {budget}, time limit {time_limit})',
            best=best_h, evaluations=search.evaluations, reason=search.exhausted or 'evaluations')
    return best_h


def local_search_unimodal(X, Z, k=2, restarts=20, iters=200, rng=None, step=1.0, decay=0.99, return_trace=False):
    """
    Randomised hill climbing on the 0-1 training risk. Each restart starts from random unit directions with
    thresholds at random quantiles of the projected data and then tries Gaussian perturbations of (r, c) with a
    decaying step, accepting moves that do not increase the risk. The all-negative hypothesis is the initial best.

    :param X:               ndarray (m, d)
    :param Z:               labels +1/-1
    :param k:               number of halfspaces, 1 or 2
    :param restarts:        number of random restarts
    :param iters:           hill-climbing steps per restart
    :param rng:             numpy Generator, seed or None
    :param step:            initial perturbation scale
    :param decay:           multiplicative step decay per iteration
    :param return_trace:    also return the running risk of every restart
    :returns:               Hypothesis, or (Hypothesis, list of per-restart risk arrays) with return_trace
    """
    X, Z = _check_xz(X, Z)
    if k not in (1, 2):
        raise ValueError(f'local_search_unimodal supports k in (1, 2), got {k}')
    rng = np.random.default_rng(rng)
    m, d = X.shape
    positive = Z == 1
    spread = float(np.std(X)) or 1.0

    best_h = all_negative_hypothesis(X, np.tile(_axis(d), (k, 1)))
    best_errors = _error_count(best_h.directions, best_h.thresholds, X, positive)
    traces = list()
    for _ in range(restarts):
        R = np.stack([unit_sphere_sample(rng, d) for _ in range(k)])
        c = np.array([np.quantile(X @ R[j], rng.uniform()) for j in range(k)])
        errors = _error_count(R, c, X, positive)
        trace = [errors]
        sigma = step
        for _ in range(iters):
            R_new = R + sigma * rng.standard_normal(R.shape)
            norms = np.linalg.norm(R_new, axis=1, keepdims=True)
            R_new = np.where(norms > 0, R_new / np.where(norms > 0, norms, 1.0), R)
            c_new = c + sigma * spread * rng.standard_normal(k)
            new_errors = _error_count(R_new, c_new, X, positive)
            if new_errors <= errors:
                R, c, errors = R_new, c_new, new_errors
            trace.append(errors)
            sigma *= decay
        traces.append(np.array(trace) / m)
        if errors < best_errors:
            best_h, best_errors = Hypothesis.from_arrays(R, c), errors
    return (best_h, traces) if return_trace else best_h


def _from_augmented(v, X):
    """perceptron weights on (x, 1) to a halfspace, v . (x, 1) >= 0 is inside"""
    d = X.shape[1]
    r, c = -v[:d], v[d]
    norm = np.linalg.norm(r)
    if norm == 0:
        column = X[:, 0]
        return Hypothesis.from_arrays(_axis(d), np.max(column) + 1.0 if c >= 0 else np.min(column) - 1.0)
    return Hypothesis.from_arrays(r / norm, c / norm)


def single_halfspace_baseline(X, Z, passes=50):
    """
    Pocket perceptron for a single halfspace on (x, z): mistake-driven updates with margin 0 on the augmented point
    (x, 1), keeping the iterate with the lowest training risk after every pass. The constant hypotheses seed the
    pocket.

    :param X:       ndarray (m, d)
    :param Z:       labels +1/-1
    :param passes:  number of sweeps over the data
    :returns:       Hypothesis with one halfspace
    """
    X, Z = _check_xz(X, Z)
    m, d = X.shape
    positive = Z == 1
    Xa = np.hstack([X, np.ones((m, 1))])

    best_h, best_errors = None, np.inf
    for candidate in (_from_augmented(np.r_[np.zeros(d), 1.0], X), _from_augmented(np.r_[np.zeros(d), -1.0], X)):
        errors = _error_count(candidate.directions, candidate.thresholds, X, positive)
        if errors < best_errors:
            best_h, best_errors = candidate, errors

    v = np.zeros(d + 1)
    for _ in range(passes):
        mistakes = 0
        for i in range(m):
            if Z[i] * (v @ Xa[i]) <= 0:
                v += Z[i] * Xa[i]
                mistakes += 1
        h = _from_augmented(v, X)
        errors = _error_count(h.directions, h.thresholds, X, positive)
        if errors < best_errors:
            best_h, best_errors = h, errors
        if mistakes == 0 or best_errors == 0:
            break
    return best_h


# uniform learner interface used by the experiment runner and the command line

def fit_decoder(dataset, rng, options):
    return multimodal_decode(dataset)


def fit_bruteforce(dataset, rng, options):
    return brute_force_erm(dataset.X, dataset.Z, k=options.get('k', 2),
                           budget=options.get('budget', DEFAULT_BUDGET), time_limit=options.get('time_limit'))


def fit_localsearch(dataset, rng, options):
    return local_search_unimodal(dataset.X, dataset.Z, k=options.get('k', 2), restarts=options.get('restarts', 20),
                                 iters=options.get('iters', 200), rng=rng)


def fit_perceptron(dataset, rng, options):
    return single_halfspace_baseline(dataset.X, dataset.Z, passes=options.get('passes', 50))


LEARNERS = {
    'decoder'   : fit_decoder,
    'bruteforce': fit_bruteforce,
    'localsearch': fit_localsearch,
    'perceptron': fit_perceptron,
}

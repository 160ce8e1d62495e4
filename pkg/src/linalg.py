import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

UNIT_TOL = 1e-12
UNIT_GATE = 1e-9
IDENTITY_TOL = 1e-14
RELATIVE_RANK_TOL = 1e-8


class InsufficientRankError(np.linalg.LinAlgError):
    """
    Raised when a point stream or a linear system does not reach the requested rank.

    :param message:     description of the failure
    :param rank:        rank that was actually achieved
    :param required:    rank that was requested
    """

    def __init__(self, message, rank, required):
        super().__init__(message)
        self.rank = rank
        self.required = required


def as_unit_vector(u, gate=UNIT_GATE):
    """
    Converts input into a flat float vector and checks it has unit Euclidean norm.

    :param u:       array-like vector
    :param gate:    maximal tolerated deviation of the norm from 1
    :returns:       ndarray(float) copy of u
    :raises ValueError: if u is empty, not finite or not unit length
    """
    u = np.array(u, dtype=float).ravel()
    if u.size == 0:
        raise ValueError('Unit vector must have at least one entry')
    if not np.all(np.isfinite(u)):
        raise ValueError('Unit vector contains non-finite entries')
    deviation = abs(np.linalg.norm(u) - 1.0)
    if deviation > gate:
        raise ValueError(f'Vector is not unit length (norm deviation {deviation:.3e})')
    return u


def orthogonality_error(Q):
    """
    Max-norm distance of Q^T Q from the identity.

    :param Q:   square matrix
    :returns:   float, max |(Q^T Q - I)_ij|
    """
    Q = np.asarray(Q, dtype=float)
    return float(np.max(np.abs(Q.T @ Q - np.eye(Q.shape[1]))))


def orthogonal_completion(u):
    """
    Builds a deterministic orthogonal matrix whose first column is the unit vector u, using a single Householder
    reflection. The reflector is w = u + sign(u_1) e_1 (sign(0) taken as -1), so that |w| >= 1 and no cancellation
    happens; when sign(u_1) = +1 the reflection maps e_1 to -u and the first column is flipped back.

    :param u:   unit vector of dimension d
    :returns:   ndarray (d, d), orthogonal, first column equal to u
    :raises ValueError: if u is not a unit vector (deviation > 1e-9)
    """
    u = as_unit_vector(u)
    d = u.size
    e1 = np.zeros(d)
    e1[0] = 1.0
    if np.linalg.norm(u - e1) <= IDENTITY_TOL:
        return np.eye(d)

    sign = 1.0 if u[0] > 0 else -1.0
    w = u + sign * e1
    Q = np.eye(d) - (2.0 / (w @ w)) * np.outer(w, w)
    if sign > 0:
        Q[:, 0] = -Q[:, 0]
    # exact first column, the reflection reproduces it up to rounding
    Q[:, 0] = u
    return Q


def select_independent_subset(points, k, tol=None):
    """
    Scans a stream of points in order and keeps every point that is not within tolerance of the span of the points
    kept so far, until k points are kept. Each candidate is reduced against the running orthonormal basis (projected
    twice for stability); the norm of what is left is its pivot.

    :param points:  sequence of m vectors of dimension d, or ndarray (m, d)
    :param k:       number of independent points wanted, k <= d
    :param tol:     absolute pivot tolerance. Defaults to 1e-8 times the largest point norm seen so far
    :returns:       list of k indices in first-encounter order
    :raises ValueError:             if k > d or k < 0
    :raises InsufficientRankError:  if the stream holds fewer than k independent points
    """
    if k < 0:
        raise ValueError(f'Cannot select a negative number of points ({k})')
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        if k == 0:
            return []
        raise InsufficientRankError(f'No points given, {k} independent points required', rank=0, required=k)
    P = np.atleast_2d(P)
    m, d = P.shape
    if k > d:
        raise ValueError(f'Cannot select {k} independent points in dimension {d}')
    if k == 0:
        return []

    basis = np.zeros((k, d))
    selected = list()
    running_max = 0.0
    for i in range(m):
        p = P[i]
        running_max = max(running_max, float(np.linalg.norm(p)))
        threshold = tol if tol is not None else RELATIVE_RANK_TOL * running_max
        j = len(selected)
        residual = p - basis[:j].T @ (basis[:j] @ p)
        residual -= basis[:j].T @ (basis[:j] @ residual)
        pivot = np.linalg.norm(residual)
        if pivot > threshold:
            basis[j] = residual / pivot
            selected.append(i)
            if len(selected) == k:
                return selected

    raise InsufficientRankError(
        f'Only {len(selected)} of {k} required independent points found in {m} points',
        rank=len(selected),
        required=k)


def solve_linear_map(X, Y):
    """
    Recovers the square matrix Q with Q x_i = y_i for all pairs, using one partially pivoted LU factorisation of the
    stacked x_i that is reused for every right-hand side (scipy.linalg.lu_factor / lu_solve).

    :param X:   k vectors of dimension d with k = d, numerically full rank
    :param Y:   k vectors of dimension d
    :returns:   ndarray (d, d)
    :raises ValueError:             if shapes do not agree
    :raises InsufficientRankError:  if elimination meets a vanishing pivot
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    k, d = X.shape
    if k != d:
        raise ValueError(f'Need exactly {d} points to recover a {d}x{d} map, got {k}')
    if Y.shape != X.shape:
        raise ValueError(f'Shape mismatch between X {X.shape} and Y {Y.shape}')

    # rows of X Q^T are the y_i
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', LinAlgWarning)
        lu, piv = lu_factor(X)
    pivots = np.abs(np.diag(lu))
    pivot_tol = d * np.finfo(float).eps * max(float(np.max(np.abs(X))), np.finfo(float).tiny)
    rank = int(np.sum(pivots > pivot_tol))
    if rank < d:
        raise InsufficientRankError(f'Linear system is rank deficient (rank {rank} of {d})', rank=rank, required=d)
    return lu_solve((lu, piv), Y).T


def unit_sphere_sample(rng, d):
    """
    Draws a direction uniformly from the unit sphere by normalising a standard Gaussian sample.

    :param rng: numpy Generator, seed or None
    :param d:   dimension, d >= 1
    :returns:   ndarray (d,) of unit norm
    :raises ValueError: if d < 1
    """
    if d < 1:
        raise ValueError(f'Dimension must be at least 1, got {d}')
    rng = np.random.default_rng(rng)
    while True:
        v = rng.standard_normal(d)
        norm = np.linalg.norm(v)
        if norm > 0:
            return v / norm

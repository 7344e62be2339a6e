"""Moment-based sufficient dimension reduction: SIR, SAVE and contour regression."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, RankError, SlicingError, ThresholdError

SIR, SAVE, CR = "SIR", "SAVE", "CR"


@dataclass(frozen=True)
class SliceSpec:
    """Equal-count slicing of the sorted response into at most ``n_slices`` groups."""

    n_slices: int = 10

    def __post_init__(self):
        if self.n_slices < 2:
            raise ValueError("need at least two slices")


@dataclass
class SubspaceEstimate:
    directions: np.ndarray
    eigenvalues: np.ndarray
    method: str


def standardize(X):
    """Center and whiten ``X``.

    Returns
    -------
    Z : ndarray, shape (N, d)
        ``(X - mean) @ W`` with zero mean and identity (1/N) covariance.
    mean : ndarray, shape (d,)
    W : ndarray, shape (d, d)
        Symmetric inverse square root of the sample covariance. A direction
        ``eta`` in ``Z`` coordinates corresponds to ``W @ eta`` for raw inputs.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X must be 2-D")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / X.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= 1e-12 * max(evals[-1], 1e-300):
        raise RankError("input covariance is singular; reduce the input dimension first")
    W = (evecs / np.sqrt(evals)) @ evecs.T
    return Xc @ W, mean, W


def slice_labels(y, n_slices):
    """Slice index for every sample.

    Samples are ordered by a stable sort of ``y`` and cut into ``n_slices``
    near-equal groups; a cut that would separate equal responses is moved so
    ties share a slice. Empty slices are dropped, so a constant response yields
    a single slice.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if n < n_slices:
        raise SlicingError(f"{n} samples cannot fill {n_slices} slices")
    order = np.argsort(y, kind="stable")
    ys = y[order]
    cuts = [len(part) for part in np.array_split(np.arange(n), n_slices)]
    bounds = np.cumsum(cuts)[:-1]
    # push each cut past any run of ties
    bounds = np.searchsorted(ys, ys[bounds - 1], side="right")
    bounds = np.unique(bounds[bounds < n])
    sorted_labels = np.zeros(n, dtype=int)
    sorted_labels[bounds] = 1
    sorted_labels = np.cumsum(sorted_labels)
    labels = np.empty(n, dtype=int)
    labels[order] = sorted_labels
    return labels


def _directions(W, vecs):
    B = W @ vecs
    Q, R = np.linalg.qr(B)
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    return _sign_normalize(Q)


def _sign_normalize(Q):
    idx = np.argmax(np.abs(Q), axis=0)
    signs = np.sign(Q[idx, np.arange(Q.shape[1])])
    signs[signs == 0] = 1.0
    return Q * signs


def _top(matrix, m):
    evals, evecs = np.linalg.eigh(0.5 * (matrix + matrix.T))
    order = np.argsort(evals)[::-1]
    return evals[order], evecs[:, order[:m]]


def _check(X, y, m):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DimensionError("X must be (N, d) with one response per row")
    if not 1 <= m <= X.shape[1]:
        raise DimensionError(f"need 1 <= m <= d, got m={m}")
    return X, y


def sir_matrix(Z, labels):
    """Slice-proportion-weighted second moment of the slice means."""
    n, d = Z.shape
    V = np.zeros((d, d))
    for s in np.unique(labels):
        zs = Z[labels == s]
        mu = zs.mean(axis=0)
        V += (zs.shape[0] / n) * np.outer(mu, mu)
    return V


def save_matrix(Z, labels):
    """``sum_s p_s (I - cov_s)^2`` with slice covariances normalized by slice size."""
    n, d = Z.shape
    V = np.zeros((d, d))
    eye = np.eye(d)
    for s in np.unique(labels):
        zs = Z[labels == s]
        zc = zs - zs.mean(axis=0)
        D = eye - zc.T @ zc / zs.shape[0]
        V += (zs.shape[0] / n) * D @ D
    return V


def sir(X, y, slices=None, m=1):
    """Sliced inverse regression."""
    X, y = _check(X, y, m)
    slices = slices or SliceSpec()
    Z, _, W = standardize(X)
    evals, vecs = _top(sir_matrix(Z, slice_labels(y, slices.n_slices)), m)
    return SubspaceEstimate(_directions(W, vecs), evals, SIR)


def save(X, y, slices=None, m=1):
    """Sliced average variance estimation."""
    X, y = _check(X, y, m)
    slices = slices or SliceSpec()
    Z, _, W = standardize(X)
    evals, vecs = _top(save_matrix(Z, slice_labels(y, slices.n_slices)), m)
    return SubspaceEstimate(_directions(W, vecs), evals, SAVE)


def contour_threshold(y, quantile=0.05, max_pairs=100_000, full_enumeration_limit=2000, seed=0):
    """Empirical ``quantile`` of ``|y_i - y_j|`` over all pairs, or over a random pair subsample for large N."""
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if n <= full_enumeration_limit:
        i, j = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=2 * max_pairs)
        j = rng.integers(0, n, size=2 * max_pairs)
        keep = i != j
        i, j = i[keep][:max_pairs], j[keep][:max_pairs]
    return float(np.quantile(np.abs(y[i] - y[j]), quantile))


def contour_matrix(Z, y, threshold):
    """Mean of ``(z_i - z_j)(z_i - z_j)^T`` over pairs with ``|y_i - y_j| <= threshold``.

    Returns the matrix and the number of qualifying pairs. Pairs are visited by
    offset in response order, which is deterministic.
    """
    n, d = Z.shape
    order = np.argsort(y, kind="stable")
    ys, Zs = y[order], Z[order]
    K = np.zeros((d, d))
    count = 0
    for k in range(1, n):
        mask = (ys[k:] - ys[:-k]) <= threshold
        if not mask.any():
            break
        D = Zs[k:][mask] - Zs[:-k][mask]
        K += D.T @ D
        count += int(mask.sum())
    if count:
        K /= count
    return K, count


def cr(X, y, m=1, threshold=None, quantile=0.05, seed=0):
    """Simple contour regression.

    Directions along which ``y`` barely changes dominate the pair second moment
    of near-level pairs, so the ``m`` eigenvectors with the smallest eigenvalues
    span the estimate. Reported eigenvalues are ``2 - lambda`` sorted
    descending; they are near zero for an uninformative direction.
    """
    X, y = _check(X, y, m)
    Z, _, W = standardize(X)
    if threshold is None:
        threshold = contour_threshold(y, quantile, seed=seed)
    K, count = contour_matrix(Z, y, threshold)
    needed = 10 * X.shape[1]
    if count < needed:
        raise ThresholdError(f"only {count} pairs below threshold {threshold:.3g}; need {needed}", count)
    evals, vecs = np.linalg.eigh(0.5 * (K + K.T))
    return SubspaceEstimate(_directions(W, vecs[:, :m]), 2.0 - evals, CR)


METHODS = {SIR: sir, SAVE: save, CR: cr}

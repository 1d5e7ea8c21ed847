"""Dimension reduction for flattened motion fields.

Two-stage sequential route: a spatial PCA pools every column of every
field and keeps d1 directions, turning each field into a (d1, L) score
matrix H; a functional PCA then models each of the d1 score rows as a
curve and keeps d2 basis functions per row, leaving a (d1, d2)
coefficient matrix per sequence.  A multilinear alternative compresses
the (2*(n-1), L) field tensors directly with one basis per mode.

Eigenvectors are sign-fixed (largest-magnitude entry positive) so fits
are reproducible run to run.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import DimensionMismatch, InsufficientData, KindMismatch
from .flatten import FlatField

# Relative eigenvalue threshold under which spectrum entries count as zero rank.
RANK_RTOL = 1e-12


def _fix_signs(basis):
    """Flip eigenvector columns so each one's largest-|entry| is positive."""
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def select_dims(eigenvalues, threshold: float) -> int:
    """Smallest dimension whose cumulative spectrum share reaches threshold.

    Entries below RANK_RTOL times the largest eigenvalue are treated as
    zero, so a threshold of 1.0 returns the numerical rank.  An all-zero
    spectrum selects 0 dimensions.
    """
    if not 0.0 < threshold <= 1.0:
        raise DimensionMismatch(f"threshold must be in (0, 1], got {threshold}")
    ev = np.asarray(eigenvalues, dtype=float).copy()
    if ev.ndim != 1 or ev.size == 0:
        raise DimensionMismatch("need a 1-d spectrum")
    ev[ev < ev.max() * RANK_RTOL] = 0.0
    total = ev.sum()
    if total <= 0.0:
        return 0
    cumulative = np.cumsum(ev) / total
    return int(np.searchsorted(cumulative, threshold - 1e-12) + 1)


@dataclass
class SpatialPCA:
    """Pooled-column PCA: mean (D,), basis (D, d1), eigenvalues (d1,)."""

    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    total_variance: float

    @property
    def dim(self) -> int:
        return int(self.basis.shape[1])


def _pool_fields(fields):
    if not fields:
        raise InsufficientData("no fields to fit")
    kind = fields[0].kind
    shape = fields[0].values.shape
    for f in fields:
        if f.kind != kind:
            raise KindMismatch(f"mixed field kinds: {kind!r} vs {f.kind!r}")
        if f.values.shape != shape:
            raise DimensionMismatch("fields must share their value shape")
    return np.concatenate([f.values.T for f in fields], axis=0)


def spatial_pca_fit(fields, n_components=None, var_threshold=0.9) -> SpatialPCA:
    """Fit the pooled spatial PCA over all columns of all fields.

    Parameters
    ----------
    fields : list of FlatField
        Same kind and shape; their columns are pooled.
    n_components : int, optional
        Fixed d1; capped at the numerical rank of the pooled data.
    var_threshold : float
        Used to select d1 when n_components is None.
    """
    x = _pool_fields(fields)
    if x.shape[0] < 2:
        raise InsufficientData("need at least two pooled columns")
    if np.all(x == x[0]):
        # constant data: the mean is the shared column and the rank is zero
        return SpatialPCA(mean=x[0].copy(), basis=np.zeros((x.shape[1], 0)),
                          eigenvalues=np.zeros(0), total_variance=0.0)
    mean = x.mean(axis=0)
    centered = x - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    eigenvalues = svals**2 / (x.shape[0] - 1)
    rank = int(np.sum(eigenvalues > eigenvalues.max() * RANK_RTOL)) if eigenvalues.size else 0
    if n_components is None:
        d1 = select_dims(eigenvalues, var_threshold)
    else:
        d1 = int(n_components)
        if d1 < 0:
            raise DimensionMismatch("n_components must be nonnegative")
    d1 = min(d1, rank)
    basis = _fix_signs(vt[:d1].T)
    return SpatialPCA(mean=mean, basis=basis, eigenvalues=eigenvalues[:d1].copy(),
                      total_variance=float(eigenvalues.sum()))


def spatial_project(field: FlatField, pca: SpatialPCA):
    """Scores H = basis^T (values - mean), shape (d1, L)."""
    if field.values.shape[0] != pca.mean.shape[0]:
        raise DimensionMismatch("field does not match the fitted spatial PCA")
    return pca.basis.T @ (field.values - pca.mean[:, None])


def spatial_reconstruct(scores, pca: SpatialPCA, like: FlatField) -> FlatField:
    """Rebuild a field from scores; kind, reference, start and dt are
    copied from the template field."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[0] != pca.dim:
        raise DimensionMismatch(f"scores must be (d1, L) with d1={pca.dim}, got {scores.shape}")
    values = pca.mean[:, None] + pca.basis @ scores
    return FlatField(like.kind, like.reference, like.start, values, like.dt)


@dataclass
class FPCABasis:
    """Per-row functional PCA: means (d1, L), orthonormal bases
    (d1, L, d2) under the dt-weighted inner product, eigenvalues (d1, d2)."""

    means: np.ndarray
    bases: np.ndarray
    eigenvalues: np.ndarray
    dt: float

    @property
    def dims(self):
        return int(self.bases.shape[0]), int(self.bases.shape[2])


def fpca_fit(score_list, dt: float, n_components=None, var_threshold=0.95) -> FPCABasis:
    """Fit a functional PCA to each spatial score row across sequences.

    The inner product between curves is the dt-weighted dot product of
    their samples.  When n_components is None, d2 is the largest
    per-row selection at var_threshold so every row reaches it.
    """
    if len(score_list) < 2:
        raise InsufficientData("need at least two score matrices")
    stack = np.stack([np.asarray(h, dtype=float) for h in score_list])
    m, d1, length = stack.shape
    means = stack.mean(axis=0)
    dev = stack - means
    bases, values = [], []
    for i in range(d1):
        cov = dev[:, i, :].T @ dev[:, i, :] / (m - 1)
        w, v = np.linalg.eigh(cov)
        order = np.argsort(w)[::-1]
        w = np.clip(w[order], 0.0, None) * dt
        bases.append(_fix_signs(v[:, order]) / np.sqrt(dt))
        values.append(w)
    values = np.stack(values)
    if n_components is None:
        picks = [select_dims(values[i], var_threshold) for i in range(d1)]
        d2 = max(max(picks), 1)
    else:
        d2 = int(n_components)
        if d2 < 1:
            raise DimensionMismatch("n_components must be positive")
    d2 = min(d2, length, m - 1 if m - 1 > 0 else 1)
    return FPCABasis(means=means,
                     bases=np.stack([b[:, :d2] for b in bases]),
                     eigenvalues=values[:, :d2].copy(),
                     dt=dt)


def fpca_project(scores, basis: FPCABasis):
    """Coefficients a[i, j] = <row_i - mean_i, basis_ij> under the
    dt-weighted inner product; shape (d1, d2)."""
    scores = np.asarray(scores, dtype=float)
    if scores.shape != basis.means.shape:
        raise DimensionMismatch(f"scores shape {scores.shape} does not match fit {basis.means.shape}")
    dev = scores - basis.means
    return np.einsum("il,ilj->ij", dev, basis.bases) * basis.dt


def fpca_reconstruct(coeffs, basis: FPCABasis):
    """Rebuild score rows from coefficients: mean_i + sum_j a_ij basis_ij."""
    coeffs = np.asarray(coeffs, dtype=float)
    d1, d2 = basis.dims
    if coeffs.shape != (d1, d2):
        raise DimensionMismatch(f"coefficients must be ({d1}, {d2}), got {coeffs.shape}")
    return basis.means + np.einsum("ij,ilj->il", coeffs, basis.bases)


@dataclass
class MPCAModel:
    """Multilinear PCA: mean tensor (D, L), row basis (D, d1), column
    basis (L, d2), captured-variance history and a convergence flag."""

    mean: np.ndarray
    row_basis: np.ndarray
    col_basis: np.ndarray
    captured: np.ndarray
    converged: bool
    total_variance: float = 0.0


def _top_eigvecs(scatter, k):
    w, v = np.linalg.eigh(scatter)
    order = np.argsort(w)[::-1][:k]
    return _fix_signs(v[:, order])


def mpca_fit(fields, d1: int, d2: int, tol: float = 1e-8, max_iter: int = 50) -> MPCAModel:
    """Fit a two-mode multilinear PCA by alternating maximization.

    Each half-step fixes one mode's basis and takes the top eigenvectors
    of the other mode's partially projected scatter, so the captured
    variance never decreases.  Stops when its relative improvement falls
    below tol; hitting max_iter returns the best iterate with
    converged=False.
    """
    x = np.stack([f.values for f in fields])
    m, rows, cols = x.shape
    if m < 2:
        raise InsufficientData("need at least two fields")
    if not (1 <= d1 <= rows and 1 <= d2 <= cols):
        raise DimensionMismatch(f"target dims ({d1}, {d2}) exceed tensor shape ({rows}, {cols})")
    mean = x.mean(axis=0)
    c = x - mean
    total = float(np.sum(c * c))
    u2 = _top_eigvecs(np.einsum("mdl,mdk->lk", c, c), d2)
    u1 = None
    history = []
    converged = False
    for _ in range(max_iter):
        proj2 = c @ u2
        u1 = _top_eigvecs(np.einsum("mdj,mej->de", proj2, proj2), d1)
        proj1 = np.einsum("de,mdl->mel", u1, c)
        u2 = _top_eigvecs(np.einsum("mil,mik->lk", proj1, proj1), d2)
        core = np.einsum("mel,lk->mek", proj1, u2)
        history.append(float(np.sum(core * core)))
        if len(history) > 1 and history[-1] - history[-2] <= tol * max(total, 1e-300):
            converged = True
            break
    return MPCAModel(mean=mean, row_basis=u1, col_basis=u2,
                     captured=np.array(history), converged=converged,
                     total_variance=total)


def mpca_project(field: FlatField, model: MPCAModel):
    """Core tensor Z = U1^T (X - mean) U2, shape (d1, d2)."""
    if field.values.shape != model.mean.shape:
        raise DimensionMismatch("field does not match the fitted MPCA")
    return model.row_basis.T @ (field.values - model.mean) @ model.col_basis


def mpca_reconstruct(core, model: MPCAModel, like: FlatField) -> FlatField:
    """Rebuild a field from its core tensor using the template's metadata."""
    core = np.asarray(core, dtype=float)
    expected = (model.row_basis.shape[1], model.col_basis.shape[1])
    if core.shape != expected:
        raise DimensionMismatch(f"core must be {expected}, got {core.shape}")
    values = model.mean + model.row_basis @ core @ model.col_basis.T
    return FlatField(like.kind, like.reference, like.start, values, like.dt)


def seq_recon_error(seq, reconstructed) -> float:
    """Mean per-frame posture distance between a sequence and its
    reconstruction through any reduce/rebuild route."""
    return geo.sequence_dist(seq, reconstructed)

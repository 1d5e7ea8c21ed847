"""Evaluation tools for comparing sets of motion sequences.

The two-sample statistic contrasts mean cross-group sequence distance
with the two within-group means (all double sums run over every ordered
pair, diagonal included) and is calibrated by a label-permutation test on
a distance matrix computed once.  Clustering of postures uses k-medoids
under the intrinsic posture distance; quantizing sequences against the
fitted modes turns them into label strings whose disagreement rates
summarize motion variability.  Classical multidimensional scaling embeds
sequences for plotting, and sorted-quantile pairs support likelihood Q-Q
comparisons.
"""

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from . import geometry as geo
from .errors import BadTarget, DimensionMismatch, InsufficientData, LengthMismatch


def posture_distance_matrix(postures, chunk: int = 512):
    """Pairwise intrinsic distances of a (N, n-1, 3) posture stack."""
    postures = np.asarray(postures, dtype=float)
    n = postures.shape[0]
    out = np.empty((n, n))
    flatrows = postures.reshape(n, -1, 3)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        dots = np.clip(np.einsum("ikd,jkd->ijk", flatrows[lo:hi], flatrows), -1.0, 1.0)
        ang = np.arccos(dots)
        # bitwise-equal bones are at distance zero despite arccos rounding
        ang[np.all(flatrows[lo:hi, None] == flatrows[None], axis=-1)] = 0.0
        out[lo:hi] = ang.sum(axis=2)
    np.fill_diagonal(out, 0.0)
    return out


def sequence_distance_matrix(seqs):
    """Pairwise mean-posture distances between sequences of equal shape."""
    arrays = [np.asarray(s, dtype=float) for s in seqs]
    shapes = {a.shape for a in arrays}
    if len(shapes) > 1:
        raise DimensionMismatch(f"sequences have mixed shapes: {sorted(shapes)}")
    stack = np.stack(arrays)
    m = stack.shape[0]
    flat = stack.reshape(m, -1, 3)
    out = np.empty((m, m))
    for i in range(m):
        dots = np.clip(np.einsum("kd,jkd->jk", flat[i], flat), -1.0, 1.0)
        ang = np.arccos(dots)
        # bitwise-equal bones are at distance zero despite arccos rounding
        ang[np.all(flat[i] == flat, axis=-1)] = 0.0
        out[i] = ang.sum(axis=1) / stack.shape[1]
    out = (out + out.T) / 2.0
    np.fill_diagonal(out, 0.0)
    return out


def _group_stat(dmat, idx_a, idx_b):
    na, nb = idx_a.size, idx_b.size
    cross = dmat[np.ix_(idx_a, idx_b)].sum()
    within_a = dmat[np.ix_(idx_a, idx_a)].sum()
    within_b = dmat[np.ix_(idx_b, idx_b)].sum()
    return 2.0 * cross / (na * nb) - within_a / (na * na) - within_b / (nb * nb)


def disco_stat(group_a, group_b) -> float:
    """Energy-style two-sample statistic between two sequence groups:
    twice the mean cross distance minus both mean within distances."""
    if not group_a or not group_b:
        raise InsufficientData("both groups need at least one sequence")
    dmat = sequence_distance_matrix(list(group_a) + list(group_b))
    idx_a = np.arange(len(group_a))
    idx_b = np.arange(len(group_a), len(group_a) + len(group_b))
    return float(_group_stat(dmat, idx_a, idx_b))


@dataclass
class DiscoResult:
    statistic: float
    p_value: float
    permutations: int


def disco_test(group_a, group_b, n_perm: int = 999, seed=None, exhaustive: bool = False) -> DiscoResult:
    """Permutation test of the two-sample statistic.

    The pooled distance matrix is computed once and only labels are
    permuted.  p = (1 + #{permuted >= observed}) / (n_perm + 1).  With
    exhaustive=True all distinct label splits are enumerated instead, in
    which case p is exact.
    """
    if not group_a or not group_b:
        raise InsufficientData("both groups need at least one sequence")
    na, nb = len(group_a), len(group_b)
    total = na + nb
    dmat = sequence_distance_matrix(list(group_a) + list(group_b))
    all_idx = np.arange(total)
    observed = float(_group_stat(dmat, all_idx[:na], all_idx[na:]))
    # relabelings that tie the observed split in exact arithmetic must count
    # as hits even when resummation shifts them a few ulps below it
    thresh = observed - 1e-12 * max(1.0, abs(observed))
    if exhaustive:
        count_ge = 0
        for subset in combinations(range(total), na):
            idx_a = np.array(subset)
            mask = np.ones(total, dtype=bool)
            mask[idx_a] = False
            if _group_stat(dmat, idx_a, all_idx[mask]) >= thresh:
                count_ge += 1
        splits = comb(total, na)
        return DiscoResult(statistic=observed, p_value=count_ge / splits, permutations=splits - 1)
    if n_perm < 1:
        raise BadTarget("n_perm must be positive")
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_perm):
        perm = rng.permutation(total)
        stat = _group_stat(dmat, perm[:na], perm[na:])
        if stat >= thresh:
            hits += 1
    return DiscoResult(statistic=observed, p_value=(1 + hits) / (n_perm + 1), permutations=n_perm)


@dataclass
class ClusterModel:
    """K-medoids result: mode postures and their training indices."""

    modes: np.ndarray
    medoid_indices: np.ndarray
    objective: float


def cluster_postures(postures, k: int, seed=None, max_sweeps: int = 200) -> ClusterModel:
    """K-medoids under the intrinsic posture distance (swap descent).

    Starts from a seeded random draw of k distinct medoids and repeatedly
    applies the best single medoid/non-medoid swap until no swap lowers
    the total assignment distance.  Deterministic for a given seed; the
    objective never increases.
    """
    postures = np.asarray(postures, dtype=float)
    n = postures.shape[0]
    if k < 1:
        raise BadTarget(f"k={k} must be positive")
    if k > n:
        raise InsufficientData(f"need at least {k} postures, got {n}")
    dmat = posture_distance_matrix(postures)
    medoids, objective = _swap_descent(dmat, k, np.random.default_rng(seed), max_sweeps)
    return ClusterModel(modes=postures[medoids].copy(), medoid_indices=medoids.copy(),
                        objective=objective)


def _swap_descent(dmat, k, rng, max_sweeps=200):
    n = dmat.shape[0]
    medoids = np.sort(rng.choice(n, size=k, replace=False))
    objective = float(dmat[:, medoids].min(axis=1).sum())
    chunk = max(1, int(2**22 // max(n, 1)))
    for _ in range(max_sweeps):
        best_gain, best_slot, best_cand = 0.0, -1, -1
        for slot in range(k):
            others = np.delete(medoids, slot)
            rest = dmat[:, others].min(axis=1) if others.size else np.full(n, np.inf)
            cand_obj = np.empty(n)
            for lo in range(0, n, chunk):
                hi = min(lo + chunk, n)
                cand_obj[lo:hi] = np.minimum(rest[:, None], dmat[:, lo:hi]).sum(axis=0)
            cand = int(np.argmin(cand_obj))
            gain = objective - float(cand_obj[cand])
            if gain > best_gain + 1e-15:
                best_gain, best_slot, best_cand = gain, slot, cand
        if best_slot < 0:
            break
        medoids[best_slot] = best_cand
        medoids = np.sort(medoids)
        objective -= best_gain
    objective = float(dmat[:, medoids].min(axis=1).sum())
    return medoids, objective


def silhouette_score(dmat, labels) -> float:
    """Mean silhouette width for a labelling under a precomputed distance
    matrix.  Singleton clusters contribute zero."""
    dmat = np.asarray(dmat, dtype=float)
    labels = np.asarray(labels)
    values = np.unique(labels)
    if values.size < 2:
        raise BadTarget("silhouette needs at least two clusters")
    n = dmat.shape[0]
    scores = np.zeros(n)
    members = {v: np.flatnonzero(labels == v) for v in values}
    for i in range(n):
        own = members[labels[i]]
        if own.size < 2:
            continue
        a = dmat[i, own].sum() / (own.size - 1)
        b = min(dmat[i, members[v]].mean() for v in values if v != labels[i])
        scores[i] = (b - a) / max(a, b)
    return float(scores.mean())


def select_k(postures, k_min: int = 2, k_max: int = 15, seed=None):
    """Sweep cluster counts and keep the one with the best silhouette.

    Returns (best_k, scores) where scores maps each swept k to its mean
    silhouette width.  Ties keep the smaller k.
    """
    postures = np.asarray(postures, dtype=float)
    n = postures.shape[0]
    k_max = min(k_max, n - 1)
    if k_min < 2 or k_min > k_max:
        raise BadTarget(f"empty sweep range [{k_min}, {k_max}] for {n} postures")
    dmat = posture_distance_matrix(postures)
    rng = np.random.default_rng(seed)
    scores = {}
    best_k = k_min
    for k in range(k_min, k_max + 1):
        medoids, _ = _swap_descent(dmat, k, rng)
        labels = np.argmin(dmat[:, medoids], axis=1)
        scores[k] = silhouette_score(dmat, labels)
        if scores[k] > scores[best_k]:
            best_k = k
    return best_k, scores


def quantize(seq, model: ClusterModel):
    """Label every frame with its nearest mode (1-based); ties keep the
    lowest mode index."""
    seq = np.asarray(seq, dtype=float)
    if seq.shape[1:] != model.modes.shape[1:]:
        raise DimensionMismatch(
            f"sequence bones {seq.shape[1:]} do not match modes {model.modes.shape[1:]}")
    dots = np.clip(np.einsum("tkd,mkd->tmk", seq, model.modes), -1.0, 1.0)
    dists = np.arccos(dots).sum(axis=2)
    return np.argmin(dists, axis=1) + 1


def variability(labels, reference_labels) -> float:
    """Fraction of frames whose label disagrees with the reference string."""
    labels = np.asarray(labels)
    reference_labels = np.asarray(reference_labels)
    if labels.shape != reference_labels.shape:
        raise LengthMismatch(f"label lengths differ: {labels.shape} vs {reference_labels.shape}")
    return float(np.mean(labels != reference_labels))


def variability_stats(label_set, reference_labels):
    """Mean and sample variance of per-sequence variability over a set."""
    values = np.array([variability(b, reference_labels) for b in label_set])
    if values.size == 0:
        raise InsufficientData("no label sequences")
    var = float(values.var(ddof=1)) if values.size > 1 else 0.0
    return float(values.mean()), var


def mean_label_sequence(seqs, model: ClusterModel):
    """Quantized per-frame intrinsic mean of a set of sequences: the
    reference label string for variability summaries."""
    stack = np.stack([np.asarray(s, dtype=float) for s in seqs])
    means = np.stack([geo.karcher_mean(stack[:, t]) for t in range(stack.shape[1])])
    return quantize(means, model)


def roughness(seq):
    """Distances between successive frames, shape (T-1,)."""
    seq = np.asarray(seq, dtype=float)
    if seq.ndim != 3 or seq.shape[0] < 2:
        raise DimensionMismatch(f"expected (T, n-1, 3) with T >= 2, got {seq.shape}")
    return geo.posture_dist(seq[:-1], seq[1:])


def mds_coords(seqs, dims: int = 2):
    """Classical multidimensional scaling of sequences.

    Double-centers the squared distance matrix, takes the top eigenpairs
    and scales eigenvectors by root eigenvalues; directions with negative
    eigenvalues are truncated to zero.  Distances are reproduced exactly
    whenever the distance matrix is Euclidean-embeddable in `dims`
    dimensions.
    """
    return mds_coords_from(sequence_distance_matrix(seqs), dims=dims)


def mds_coords_from(dmat, dims: int = 2):
    """Classical MDS of a precomputed symmetric distance matrix."""
    if dims < 1:
        raise BadTarget("dims must be positive")
    dmat = np.asarray(dmat, dtype=float)
    m = dmat.shape[0]
    j = np.eye(m) - np.ones((m, m)) / m
    b = -0.5 * j @ (dmat * dmat) @ j
    w, v = np.linalg.eigh((b + b.T) / 2.0)
    order = np.argsort(w)[::-1][:dims]
    w = w[order]
    v = v[:, order]
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    v = v * signs
    coords = np.zeros((m, dims))
    keep = w > 0
    coords[:, keep] = v[:, keep] * np.sqrt(w[keep])
    return coords


def qq_data(sample_x, sample_y):
    """Sorted-quantile pairs of two samples at matched plotting positions.

    Positions are (k - 0.5) / N for N = max(len(x), len(y)); each sample's
    empirical quantile function is linearly interpolated (clamped at the
    extremes).  Equal-length samples pair their sorted values directly.
    """
    x = np.sort(np.asarray(sample_x, dtype=float))
    y = np.sort(np.asarray(sample_y, dtype=float))
    if x.size == 0 or y.size == 0:
        raise InsufficientData("both samples need at least one value")
    n = max(x.size, y.size)
    p = (np.arange(n) + 0.5) / n
    qx = np.interp(p, (np.arange(x.size) + 0.5) / x.size, x)
    qy = np.interp(p, (np.arange(y.size) + 0.5) / y.size, y)
    return np.column_stack([qx, qy])

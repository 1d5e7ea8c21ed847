"""Oracle tests for the two-sample test, posture clustering, quantization,
variability, roughness, MDS embedding, and Q-Q helpers."""

from itertools import combinations

import numpy as np
import pytest

from motionemu import geometry as geo
from motionemu.errors import (BadTarget, DimensionMismatch, InsufficientData,
                              LengthMismatch)
from motionemu.evaluate import (
    ClusterModel,
    cluster_postures,
    disco_stat,
    disco_test,
    mds_coords,
    mds_coords_from,
    mean_label_sequence,
    posture_distance_matrix,
    qq_data,
    quantize,
    roughness,
    select_k,
    sequence_distance_matrix,
    silhouette_score,
    variability,
    variability_stats,
)

E1 = np.array([1.0, 0.0, 0.0])


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def rot_xy(t):
    return np.array([np.cos(t), np.sin(t), 0.0])


def rand_seq(rng, t=4, bones=2, scale=0.4, base=None):
    if base is None:
        base = unit(rng.normal(size=(bones, 3)))
    return unit(base + scale * rng.normal(size=(t, base.shape[0], 3)))


def seq_dist(a, b):
    return float(np.mean(geo.posture_dist(a, b)))


def disco_oracle(group_a, group_b):
    na, nb = len(group_a), len(group_b)
    cross = sum(seq_dist(a, b) for a in group_a for b in group_b)
    wa = sum(seq_dist(x, y) for x in group_a for y in group_a)
    wb = sum(seq_dist(x, y) for x in group_b for y in group_b)
    return 2.0 * cross / (na * nb) - wa / (na * na) - wb / (nb * nb)


def blob(rng, center, count, scale=0.02):
    return unit(center + scale * rng.normal(size=(count, center.shape[0], 3)))


BLOB_CENTERS = np.array([
    [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
    [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
])


# ---------------------------------------------------------------- distance matrices


def test_posture_distance_matrix_matches_pairwise_metric():
    rng = np.random.default_rng(3)
    postures = unit(rng.normal(size=(9, 3, 3)))
    dmat = posture_distance_matrix(postures)
    assert np.array_equal(np.diag(dmat), np.zeros(9))
    assert np.allclose(dmat, dmat.T, atol=1e-12)
    for i in range(9):
        for j in range(9):
            assert abs(dmat[i, j] - float(geo.posture_dist(postures[i], postures[j]))) < 1e-10
    assert np.array_equal(posture_distance_matrix(postures, chunk=2), dmat)


def test_sequence_distance_matrix_identical_rows_are_exact_zero():
    rng = np.random.default_rng(4)
    s = rand_seq(rng, t=5)
    dmat = sequence_distance_matrix([s, s.copy(), rand_seq(rng, t=5)])
    assert dmat[0, 1] == 0.0 and dmat[1, 0] == 0.0
    assert dmat[0, 2] > 0.1
    with pytest.raises(DimensionMismatch):
        sequence_distance_matrix([s, s[:3]])


# ---------------------------------------------------------------- disco statistic


def test_disco_stat_identical_groups_is_exactly_zero():
    rng = np.random.default_rng(0)
    group = [rand_seq(rng) for _ in range(3)]
    assert disco_stat(group, [g.copy() for g in group]) == 0.0


def test_disco_stat_singletons():
    rng = np.random.default_rng(1)
    a, b = rand_seq(rng), rand_seq(rng)
    assert disco_stat([a], [b]) == pytest.approx(2.0 * seq_dist(a, b), rel=1e-12)


def test_disco_stat_matches_double_loop_oracle():
    rng = np.random.default_rng(2)
    group_a = [rand_seq(rng, t=5, bones=3) for _ in range(4)]
    group_b = [rand_seq(rng, t=5, bones=3) for _ in range(5)]
    assert disco_stat(group_a, group_b) == pytest.approx(disco_oracle(group_a, group_b), abs=1e-10)


def test_disco_stat_errors():
    rng = np.random.default_rng(5)
    good = [rand_seq(rng)]
    with pytest.raises(InsufficientData):
        disco_stat([], good)
    with pytest.raises(InsufficientData):
        disco_stat(good, [])
    with pytest.raises(DimensionMismatch):
        disco_stat(good, [rand_seq(rng, t=7)])


# ---------------------------------------------------------------- disco test


def test_disco_test_exhaustive_matches_enumeration():
    rng = np.random.default_rng(6)
    group_a = [rand_seq(rng, t=3) for _ in range(3)]
    group_b = [rand_seq(rng, t=3, scale=0.6) for _ in range(3)]
    result = disco_test(group_a, group_b, exhaustive=True)
    assert result.permutations == 19
    assert result.statistic == pytest.approx(disco_oracle(group_a, group_b), abs=1e-10)

    pooled = group_a + group_b
    count = 0
    for subset in combinations(range(6), 3):
        rest = [i for i in range(6) if i not in subset]
        stat = disco_oracle([pooled[i] for i in subset], [pooled[i] for i in rest])
        if stat >= result.statistic - 1e-9:
            count += 1
    assert round(result.p_value * 20) == count
    assert 0.0 < result.p_value <= 1.0


def test_disco_test_seeded_and_add_one():
    rng = np.random.default_rng(7)
    group_a = [rand_seq(rng) for _ in range(4)]
    group_b = [rand_seq(rng) for _ in range(4)]
    r1 = disco_test(group_a, group_b, n_perm=49, seed=11)
    r2 = disco_test(group_a, group_b, n_perm=49, seed=11)
    assert r1.p_value == r2.p_value
    assert r1.permutations == 49
    # add-one convention: p is k/50 for integer k >= 1
    assert 0.0 < r1.p_value <= 1.0
    assert round(r1.p_value * 50) == pytest.approx(r1.p_value * 50, abs=1e-12)
    with pytest.raises(BadTarget):
        disco_test(group_a, group_b, n_perm=0)


def test_disco_test_calibrated_under_the_null():
    rng = np.random.default_rng(8)
    rejections = 0
    repeats = 200
    for _ in range(repeats):
        base = unit(rng.normal(size=(2, 3)))
        group_a = [rand_seq(rng, t=3, scale=0.35, base=base) for _ in range(6)]
        group_b = [rand_seq(rng, t=3, scale=0.35, base=base) for _ in range(6)]
        p = disco_test(group_a, group_b, n_perm=99, seed=int(rng.integers(2**32))).p_value
        if p < 0.05:
            rejections += 1
    assert 0.01 <= rejections / repeats <= 0.12


def test_disco_test_power_under_strong_shift():
    rng = np.random.default_rng(9)
    base_a = unit(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))
    base_b = unit(np.array([[np.cos(1.2), np.sin(1.2), 0.0], [np.sin(1.2), 0.0, np.cos(1.2)]]))
    hits = 0
    repeats = 40
    for _ in range(repeats):
        group_a = [rand_seq(rng, t=3, scale=0.2, base=base_a) for _ in range(10)]
        group_b = [rand_seq(rng, t=3, scale=0.2, base=base_b) for _ in range(10)]
        p = disco_test(group_a, group_b, n_perm=99, seed=int(rng.integers(2**32))).p_value
        if p <= 0.01:
            hits += 1
    assert hits >= 0.95 * repeats


# ---------------------------------------------------------------- clustering


def test_cluster_recovers_planted_blobs():
    rng = np.random.default_rng(10)
    groups = [blob(rng, c, 12) for c in BLOB_CENTERS]
    postures = np.concatenate(groups)
    model = cluster_postures(postures, k=3, seed=0)
    labels = quantize(postures, model)
    seen = []
    for g in range(3):
        block = labels[12 * g:12 * (g + 1)]
        assert np.all(block == block[0])
        seen.append(int(block[0]))
    assert sorted(seen) == [1, 2, 3]


def test_cluster_k_equals_sample_size():
    rng = np.random.default_rng(11)
    postures = unit(rng.normal(size=(6, 2, 3)))
    model = cluster_postures(postures, k=6, seed=0)
    assert model.objective == 0.0
    assert np.array_equal(model.medoid_indices, np.arange(6))
    assert np.array_equal(model.modes, postures)


def test_cluster_determinism_and_objective_consistency():
    rng = np.random.default_rng(12)
    postures = unit(rng.normal(size=(25, 2, 3)))
    m1 = cluster_postures(postures, k=4, seed=3)
    m2 = cluster_postures(postures, k=4, seed=3)
    assert np.array_equal(m1.medoid_indices, m2.medoid_indices)
    assert m1.objective == m2.objective
    dmat = posture_distance_matrix(postures)
    assert m1.objective == pytest.approx(dmat[:, m1.medoid_indices].min(axis=1).sum(), abs=1e-12)
    # descent never ends worse than its seeded start
    start = np.sort(np.random.default_rng(3).choice(25, size=4, replace=False))
    assert m1.objective <= dmat[:, start].min(axis=1).sum() + 1e-12


def test_cluster_errors():
    rng = np.random.default_rng(13)
    postures = unit(rng.normal(size=(4, 2, 3)))
    with pytest.raises(InsufficientData):
        cluster_postures(postures, k=5)
    with pytest.raises(BadTarget):
        cluster_postures(postures, k=0)


def test_silhouette_matches_hand_formula():
    rng = np.random.default_rng(14)
    postures = np.concatenate([blob(rng, BLOB_CENTERS[0], 3, scale=0.1),
                               blob(rng, BLOB_CENTERS[1], 4, scale=0.1)])
    dmat = posture_distance_matrix(postures)
    labels = np.array([0, 0, 0, 1, 1, 1, 1])
    expected = []
    for i in range(7):
        own = [j for j in range(7) if labels[j] == labels[i] and j != i]
        other = [j for j in range(7) if labels[j] != labels[i]]
        a = np.mean(dmat[i, own])
        b = np.mean(dmat[i, other])
        expected.append((b - a) / max(a, b))
    assert silhouette_score(dmat, labels) == pytest.approx(np.mean(expected), abs=1e-12)
    # singleton cluster contributes zero
    labels_single = np.array([0, 1, 1, 1, 1, 1, 1])
    expected_single = []
    for i in range(1, 7):
        a = np.mean([dmat[i, j] for j in range(1, 7) if j != i])
        b = dmat[i, 0]
        expected_single.append((b - a) / max(a, b))
    assert silhouette_score(dmat, labels_single) == pytest.approx(np.sum(expected_single) / 7, abs=1e-12)
    with pytest.raises(BadTarget):
        silhouette_score(dmat, np.zeros(7, dtype=int))


def test_select_k_finds_planted_count():
    rng = np.random.default_rng(15)
    postures = np.concatenate([blob(rng, c, 8) for c in BLOB_CENTERS])
    best_k, scores = select_k(postures, k_min=2, k_max=6, seed=0)
    assert best_k == 3
    assert sorted(scores) == [2, 3, 4, 5, 6]
    assert scores[3] == max(scores.values())


# ---------------------------------------------------------------- quantize


def test_quantize_constant_mode_sequence():
    rng = np.random.default_rng(16)
    modes = np.stack([blob(rng, c, 1, scale=0.3)[0] for c in BLOB_CENTERS] * 2)[:4]
    model = ClusterModel(modes=modes[:4], medoid_indices=np.arange(4), objective=0.0)
    seq = np.tile(model.modes[2], (5, 1, 1))
    assert np.array_equal(quantize(seq, model), np.full(5, 3))


def test_quantize_tie_keeps_lower_index():
    far = np.stack([rot_xy(2.5), rot_xy(2.5)])
    v1 = np.stack([rot_xy(0.5), E1])
    v2 = np.stack([rot_xy(-0.5), E1])
    model = ClusterModel(modes=np.stack([far, v1, v2]), medoid_indices=np.arange(3),
                         objective=0.0)
    seq = np.stack([np.stack([E1, E1])])
    # modes 2 and 3 are exactly equidistant from the frame
    assert np.array_equal(quantize(seq, model), np.array([2]))


def test_quantize_matches_scan_oracle_and_is_idempotent():
    rng = np.random.default_rng(17)
    modes = unit(rng.normal(size=(5, 2, 3)))
    model = ClusterModel(modes=modes, medoid_indices=np.arange(5), objective=0.0)
    seq = unit(rng.normal(size=(30, 2, 3)))
    labels = quantize(seq, model)
    for t in range(30):
        dists = [float(geo.posture_dist(seq[t], m)) for m in modes]
        assert labels[t] == int(np.argmin(dists)) + 1
    assert np.array_equal(quantize(seq, model), labels)
    assert np.array_equal(quantize(model.modes, model), np.arange(1, 6))
    with pytest.raises(DimensionMismatch):
        quantize(unit(rng.normal(size=(4, 3, 3))), model)


# ---------------------------------------------------------------- variability


def test_variability_examples():
    labels = np.array([1, 2, 3, 2, 1])
    assert variability(labels, labels.copy()) == 0.0
    assert variability(labels, labels + 1) == 1.0
    assert variability(np.array([1, 1, 2, 2]), np.array([1, 2, 2, 2])) == 0.25
    with pytest.raises(LengthMismatch):
        variability(labels, labels[:3])


def test_variability_stats():
    ref = np.array([1, 1, 1, 1])
    label_set = [np.array([1, 1, 1, 1]), np.array([2, 1, 1, 1]), np.array([2, 2, 1, 1])]
    mean, var = variability_stats(label_set, ref)
    values = np.array([0.0, 0.25, 0.5])
    assert mean == pytest.approx(values.mean(), abs=1e-15)
    assert var == pytest.approx(values.var(ddof=1), abs=1e-15)
    single_mean, single_var = variability_stats([ref], ref)
    assert single_mean == 0.0 and single_var == 0.0
    with pytest.raises(InsufficientData):
        variability_stats([], ref)


def test_mean_label_sequence_of_identical_set():
    rng = np.random.default_rng(18)
    modes = np.stack([blob(rng, c, 1, scale=0.25)[0] for c in BLOB_CENTERS])
    model = ClusterModel(modes=modes, medoid_indices=np.arange(3), objective=0.0)
    seq = blob(rng, BLOB_CENTERS[1], 6, scale=0.05)
    labels = mean_label_sequence([seq, seq.copy(), seq.copy()], model)
    assert np.array_equal(labels, quantize(seq, model))


# ---------------------------------------------------------------- roughness


def test_roughness_constant_sequence_is_zero():
    seq = np.tile(unit(np.array([[0.3, 0.1, 1.0]])), (8, 1, 1))
    assert np.array_equal(roughness(seq), np.zeros(7))


def test_roughness_uniform_arc_is_constant():
    step = 0.07
    ts = step * np.arange(40)
    seq = np.stack([np.stack([rot_xy(t)]) for t in ts])
    values = roughness(seq)
    assert values.shape == (39,)
    assert np.max(np.abs(values - step)) < 1e-12
    with pytest.raises(DimensionMismatch):
        roughness(seq[:1])


# ---------------------------------------------------------------- MDS


def tri_seqs():
    def const_seq(b1, b2, b3):
        posture = np.stack([b1, b2, b3])
        return np.stack([posture, posture])

    a = const_seq(E1, E1, rot_xy(0.1))
    b = const_seq(rot_xy(0.2), E1, E1)
    c = const_seq(E1, rot_xy(0.3), E1)
    return [a, b, c]


def test_mds_recovers_right_triangle():
    seqs = tri_seqs()
    dmat = sequence_distance_matrix(seqs)
    expected = np.array([[0.0, 0.3, 0.4], [0.3, 0.0, 0.5], [0.4, 0.5, 0.0]])
    assert np.allclose(dmat, expected, atol=1e-12)
    coords = mds_coords(seqs, dims=2)
    emb = np.sqrt(((coords[:, None] - coords[None]) ** 2).sum(-1))
    assert np.max(np.abs(emb - expected)) < 1e-8


def test_mds_identical_sequences_embed_at_origin():
    rng = np.random.default_rng(19)
    s = rand_seq(rng, t=4)
    coords = mds_coords([s, s.copy(), s.copy(), s.copy()], dims=2)
    assert np.array_equal(coords, np.zeros((4, 2)))


def test_mds_truncation_never_expands_distances():
    rng = np.random.default_rng(20)
    base = unit(rng.normal(size=(2, 3)))
    seqs = [rand_seq(rng, t=5, scale=0.3, base=base) for _ in range(8)]
    dmat = sequence_distance_matrix(seqs)
    prev = None
    for dims in range(1, 8):
        coords = mds_coords_from(dmat, dims=dims)
        emb = np.sqrt(((coords[:, None] - coords[None]) ** 2).sum(-1))
        assert float((emb - dmat).max()) < 1e-9
        if prev is not None:
            # adding directions never shrinks an embedded distance
            assert float((emb - prev).min()) > -1e-12
        prev = emb
    assert np.array_equal(mds_coords(seqs, dims=3), mds_coords_from(dmat, dims=3))
    with pytest.raises(BadTarget):
        mds_coords_from(dmat, dims=0)


# ---------------------------------------------------------------- Q-Q data


def qq_oracle(sample_x, sample_y):
    xs, ys = np.sort(sample_x), np.sort(sample_y)
    n = max(xs.size, ys.size)

    def quantile(s, p):
        pos = [(j + 0.5) / s.size for j in range(s.size)]
        if p <= pos[0]:
            return s[0]
        if p >= pos[-1]:
            return s[-1]
        j = 0
        while pos[j + 1] < p:
            j += 1
        w = (p - pos[j]) / (pos[j + 1] - pos[j])
        return s[j] * (1.0 - w) + s[j + 1] * w

    pts = [(k + 0.5) / n for k in range(n)]
    return np.array([[quantile(xs, p), quantile(ys, p)] for p in pts])


def test_qq_identical_lists_on_identity_line():
    rng = np.random.default_rng(21)
    x = rng.normal(size=37)
    pairs = qq_data(x, x.copy())
    assert np.array_equal(pairs[:, 0], pairs[:, 1])
    assert np.array_equal(pairs[:, 0], np.sort(x))


def test_qq_constant_offset_line():
    rng = np.random.default_rng(22)
    x = rng.normal(size=25)
    pairs = qq_data(x, x + 1.75)
    assert np.array_equal(pairs[:, 1], pairs[:, 0] + 1.75)


def test_qq_unequal_sizes_match_interpolation_oracle():
    rng = np.random.default_rng(23)
    x = rng.normal(size=11)
    y = rng.normal(size=40)
    pairs = qq_data(x, y)
    assert pairs.shape == (40, 2)
    assert np.max(np.abs(pairs - qq_oracle(x, y))) < 1e-12
    swapped = qq_data(y, x)
    assert np.max(np.abs(swapped - qq_oracle(y, x))) < 1e-12
    with pytest.raises(InsufficientData):
        qq_data([], y)

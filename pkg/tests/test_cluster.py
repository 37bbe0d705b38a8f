import itertools
import warnings

import numpy as np
import pytest
from scipy import stats
from sklearn.base import clone

from shelterscan.cluster import (
    DegenerateDataError,
    KMeans,
    ZScoreScaler,
    client_features,
    cluster_population,
    hotelling_t2,
    kmeans,
    label_clusters,
    lloyd,
    kmeans_plusplus,
    standardize,
)

ARCHETYPE_MEANS = {"Transitional": (1.8, 30.3), "Episodic": (9.2, 167.0), "Chronic": (3.7, 1273.1)}


def blobs(sizes, centers, sd=1.0, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(c, sd, size=(n, len(c))) for n, c in zip(sizes, centers)])
    y = np.repeat(np.arange(len(sizes)), sizes)
    return X, y


def best_permutation_accuracy(labels, truth, k):
    return max(np.mean(np.array(p)[labels] == truth) for p in itertools.permutations(range(k)))


def test_standardize_basic():
    Z, mean, sd = standardize([[1.0], [2.0], [3.0]])
    assert Z.ravel().tolist() == [-1.0, 0.0, 1.0]
    assert mean.tolist() == [2.0] and sd.tolist() == [1.0]


def test_standardize_idempotent_and_recomputed():
    rng = np.random.default_rng(1)
    X = rng.normal(5, 3, size=(200, 2))
    Z, _, _ = standardize(X)
    assert np.allclose(Z.mean(axis=0), 0, atol=1e-9)
    assert np.allclose(Z.std(axis=0, ddof=1), 1, atol=1e-9)
    assert np.allclose(standardize(Z)[0], Z, atol=1e-12)


def test_standardize_zero_variance_names_column():
    with pytest.raises(DegenerateDataError, match=r"\[1\]"):
        standardize([[1.0, 2.0], [2.0, 2.0], [3.0, 2.0]])


def test_scaler_estimator():
    X = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 60.0]])
    sc = ZScoreScaler()
    Z = sc.fit_transform(X)
    assert np.allclose(sc.inverse_transform(Z), X)
    assert clone(sc).get_params() == {}


def test_three_points_three_clusters():
    X = np.array([[0.0, 0.0], [5.0, 1.0], [-3.0, 8.0]])
    run = kmeans(X, 3, seed=0)
    assert run.inertia == 0.0
    assert sorted(map(tuple, run.centers)) == sorted(map(tuple, X))


def test_k_larger_than_points():
    with pytest.raises(ValueError):
        kmeans(np.zeros((2, 2)), 3)


def test_blob_recovery():
    X, y = blobs([100, 100, 100], [(0, 0), (10, 0), (0, 10)], seed=3)
    model = KMeans(3, seed=1).fit(X)
    assert best_permutation_accuracy(model.labels_, y, 3) == 1.0
    assert np.array_equal(model.predict(X), model.labels_)


def test_duplicated_data_same_centers():
    X, _ = blobs([100, 100, 100], [(0, 0), (10, 0), (0, 10)], seed=4)
    a = kmeans(X, 3, seed=2).centers
    b = kmeans(np.vstack([X, X]), 3, seed=2).centers
    key = lambda c: tuple(np.round(c, 6))
    assert np.allclose(sorted(a, key=key), sorted(b, key=key), atol=1e-9)


def test_wcss_non_increasing_and_assignment_optimal():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(400, 2)) * [1, 3]
    run = lloyd(X, kmeans_plusplus(X, 5, rng))
    assert all(b <= a + 1e-9 for a, b in zip(run.inertia_history, run.inertia_history[1:]))
    d = ((X[:, None, :] - run.centers[None]) ** 2).sum(axis=2)
    own = d[np.arange(len(X)), run.labels]
    assert np.all(own <= d.min(axis=1) + 1e-12)


def test_empty_cluster_is_reseeded():
    X = np.array([[0.0], [0.1], [0.2], [10.0]])
    # a far-away start leaves cluster 2 empty on the first assignment
    run = lloyd(X, np.array([[0.0], [10.0], [100.0]]))
    assert len(set(run.labels.tolist())) == 3


def test_deterministic_given_seed():
    X, _ = blobs([50, 50, 50], [(0, 0), (4, 0), (0, 4)], seed=9)
    a = KMeans(3, seed=5).fit(X)
    b = clone(a).fit(X)
    assert np.array_equal(a.cluster_centers_, b.cluster_centers_)
    assert a.get_params() == {"n_clusters": 3, "seed": 5, "restarts": 10, "max_iter": 300}


def test_assignment_invariant_under_affine_rescaling():
    X, _ = blobs([80, 80, 80], [(0, 0), (6, 0), (0, 6)], seed=12)
    a = cluster_population(X, k=3, seed=0)
    b = cluster_population(X * [3.0, 0.2] + [100.0, -7.0], k=3, seed=0)
    assert best_permutation_accuracy(a.labels, b.labels, 3) == 1.0


def test_label_clusters_reference_means():
    means = [ARCHETYPE_MEANS["Transitional"], ARCHETYPE_MEANS["Episodic"], ARCHETYPE_MEANS["Chronic"]]
    assert label_clusters(means) == ["Transitional", "Episodic", "Chronic"]
    perm = [means[2], means[0], means[1]]
    assert label_clusters(perm) == ["Chronic", "Transitional", "Episodic"]


def test_label_clusters_wrong_k_warns():
    with pytest.warns(UserWarning):
        assert label_clusters([(1, 2), (3, 4)]) is None


def test_labels_round_trip_from_reference_means_blobs():
    names = list(ARCHETYPE_MEANS)
    sizes = [852, 119, 29]
    centers = [ARCHETYPE_MEANS[n] for n in names]
    X, y = blobs(sizes, centers, sd=[0.3, 4.0], seed=21)
    rep = cluster_population(X, k=3, seed=0)
    predicted = [rep.names[j] for j in rep.labels]
    assert np.mean(np.array(predicted) == np.array(names)[y]) > 0.99


def test_hotelling_identical_groups():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(30, 2))
    t = hotelling_t2(A, A.copy())
    assert t.t2 == pytest.approx(0, abs=1e-20) and t.p_value == pytest.approx(1.0)


def _reference_hotelling(A, B):
    n1, n2, p = len(A), len(B), A.shape[1]
    S = ((n1 - 1) * np.cov(A.T) + (n2 - 1) * np.cov(B.T)) / (n1 + n2 - 2)
    d = A.mean(0) - B.mean(0)
    t2 = n1 * n2 / (n1 + n2) * d @ np.linalg.inv(S) @ d
    f = (n1 + n2 - p - 1) / (p * (n1 + n2 - 2)) * t2
    return t2, stats.f.sf(f, p, n1 + n2 - p - 1)


def test_hotelling_matches_reference_and_separates_blobs():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(50, 2))
    B = rng.normal(size=(50, 2)) + [10.0, 0.0]
    t = hotelling_t2(A, B)
    t2, p = _reference_hotelling(A, B)
    assert t.t2 == pytest.approx(t2, rel=1e-10)
    assert t.p_value < 0.001 and t.df == (2, 97)
    C = rng.normal(size=(40, 2))
    D = rng.normal(size=(35, 2)) + [0.3, -0.2]
    t2, p = _reference_hotelling(C, D)
    got = hotelling_t2(C, D)
    assert got.t2 == pytest.approx(t2, rel=1e-10) and got.p_value == pytest.approx(p, abs=1e-10)


def test_hotelling_affine_behaviour():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(40, 2))
    B = rng.normal(size=(45, 2)) + [0.5, 0.2]
    base = hotelling_t2(A, B).t2
    assert hotelling_t2(A * 2, B * 2).t2 == pytest.approx(base, rel=1e-9)
    assert hotelling_t2(A, B + [1.0, 0.0]).t2 != pytest.approx(base, rel=1e-3)


def test_hotelling_p_decreases_with_t2():
    rng = np.random.default_rng(6)
    A = rng.normal(size=(30, 2))
    B = rng.normal(size=(30, 2))
    tests = sorted((hotelling_t2(A, B + [s, 0]) for s in np.linspace(-2, 2, 21)), key=lambda t: t.t2)
    ps = [t.p_value for t in tests]
    assert all(b <= a for a, b in zip(ps, ps[1:]))


def test_hotelling_errors():
    A = np.column_stack([np.arange(10.0), np.zeros(10)])
    with pytest.raises(np.linalg.LinAlgError):
        hotelling_t2(A, A + 1)
    with pytest.raises(ValueError):
        hotelling_t2(np.zeros((2, 2)), np.ones((5, 2)))


def test_client_features_order(synthetic_population):
    _, clients, tls = synthetic_population
    ids, X = client_features(tls)
    assert ids == sorted(tls)
    truth = {c.client_id: c for c in clients}
    assert all(X[i, 0] == truth[cid].n_episodes and X[i, 1] == len(truth[cid].stay_days)
               for i, cid in enumerate(ids))

"""Population structure: z-scores, k-means, archetype labels, Hotelling's T-squared."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .special import f_sf
from .timeline import ClientTimeline, GapPolicy, count_episodes

logger = logging.getLogger(__name__)

FEATURE_NAMES = ("total_episodes", "total_stays")
ARCHETYPES = ("Transitional", "Episodic", "Chronic")


class DegenerateDataError(ValueError):
    pass


def client_features(
    timelines: Mapping[str, ClientTimeline] | Iterable[ClientTimeline],
    policy: GapPolicy | None = None,
) -> tuple[list[str], np.ndarray]:
    """Client ids (sorted) and an ``(n, 2)`` array of [total episodes, total stays]."""
    policy = policy or GapPolicy()
    items = list(timelines.values()) if isinstance(timelines, Mapping) else list(timelines)
    items.sort(key=lambda tl: tl.client_id)
    X = np.array([[count_episodes(tl, policy), tl.n_stays] for tl in items], dtype=float)
    return [tl.client_id for tl in items], X.reshape(-1, 2)


def standardize(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z-scores per column using the sample (n-1) standard deviation.

    Returns ``(Z, mean, sd)``.
    """
    X = check_array(X, dtype=float)
    if X.shape[0] < 2:
        raise DegenerateDataError("need at least two rows to standardize")
    mean = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    flat = np.flatnonzero(~(sd > 0))
    if flat.size:
        raise DegenerateDataError(f"zero variance in column(s) {flat.tolist()}")
    return (X - mean) / sd, mean, sd


class ZScoreScaler(TransformerMixin, BaseEstimator):
    """Column-wise z-scores with the n-1 divisor."""

    def fit(self, X, y=None):
        _, self.mean_, self.scale_ = standardize(X)
        self.n_features_in_ = self.mean_.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=float)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, Z):
        check_is_fitted(self)
        return check_array(Z, dtype=float) * self.scale_ + self.mean_


def _sq_dist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def kmeans_plusplus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = _sq_dist(X, centers[:1]).ravel()
    for j in range(1, k):
        total = closest.sum()
        idx = rng.choice(n, p=closest / total) if total > 0 else rng.integers(n)
        centers[j] = X[idx]
        closest = np.minimum(closest, _sq_dist(X, centers[j : j + 1]).ravel())
    return centers


@dataclass
class LloydRun:
    centers: np.ndarray
    labels: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: list[float]
    converged: bool


def lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int = 300) -> LloydRun:
    """Alternate assignment and mean updates until no label changes.

    An emptied cluster is re-seeded at the point farthest from its current center.
    """
    centers = centers.copy()
    k = centers.shape[0]
    labels = np.full(X.shape[0], -1)
    history: list[float] = []
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d = _sq_dist(X, centers)
        new_labels = d.argmin(axis=1)
        history.append(float(d[np.arange(len(X)), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = X[members].mean(axis=0)
            else:
                far = int(d[np.arange(len(X)), labels].argmax())
                logger.debug("re-seeding empty cluster %d at point %d", j, far)
                centers[j] = X[far]
                labels[far] = j
                d[far] = 0.0
    inertia = float(_sq_dist(X, centers)[np.arange(len(X)), labels].sum())
    return LloydRun(centers, labels, inertia, n_iter, history, converged)


def kmeans(X, k: int = 3, seed: int = 0, restarts: int = 10, max_iter: int = 300) -> LloydRun:
    """Best of ``restarts`` k-means++ seeded Lloyd runs by within-cluster sum of squares."""
    X = check_array(X, dtype=float)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > X.shape[0]:
        raise ValueError(f"k={k} exceeds the {X.shape[0]} available points")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = np.random.default_rng(seed)
    best: LloydRun | None = None
    for _ in range(restarts):
        run = lloyd(X, kmeans_plusplus(X, k, rng), max_iter)
        if best is None or run.inertia < best.inertia:
            best = run
    return best


class KMeans(ClusterMixin, BaseEstimator):
    """k-means with k-means++ seeding, restarts and farthest-point empty-cluster repair.

    Parameters
    ----------
    n_clusters : int, default=3
    seed : int, default=0
    restarts : int, default=10
    max_iter : int, default=300
    """

    def __init__(self, n_clusters: int = 3, seed: int = 0, restarts: int = 10, max_iter: int = 300):
        self.n_clusters = n_clusters
        self.seed = seed
        self.restarts = restarts
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        run = kmeans(X, self.n_clusters, self.seed, self.restarts, self.max_iter)
        self.cluster_centers_ = run.centers
        self.labels_ = run.labels
        self.inertia_ = run.inertia
        self.n_iter_ = run.n_iter
        self.converged_ = run.converged
        self.inertia_history_ = run.inertia_history
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=float)
        return _sq_dist(X, self.cluster_centers_).argmin(axis=1)


def label_clusters(means: Sequence[Sequence[float]]) -> list[str] | None:
    """Name clusters from their unstandardized [episodes, stays] means.

    Chronic has the most stays; of the remaining two, Episodic has more episodes.
    Returns ``None`` (with a warning) unless there are exactly three clusters.
    """
    means = np.asarray(means, dtype=float)
    if means.shape[0] != 3:
        warnings.warn(f"archetype labels need k=3, got k={means.shape[0]}; skipping", stacklevel=2)
        return None
    chronic = int(means[:, 1].argmax())
    rest = [i for i in range(3) if i != chronic]
    episodic = max(rest, key=lambda i: means[i, 0])
    labels = ["Transitional"] * 3
    labels[chronic] = "Chronic"
    labels[episodic] = "Episodic"
    return labels


@dataclass(frozen=True)
class SeparationTest:
    pair: tuple[str, str]
    t2: float
    f: float
    df: tuple[int, int]
    p_value: float


def hotelling_t2(a, b, pair: tuple[str, str] = ("A", "B")) -> SeparationTest:
    """Two-sample Hotelling's T-squared with pooled covariance."""
    a = check_array(a, dtype=float)
    b = check_array(b, dtype=float)
    if a.shape[1] != b.shape[1]:
        raise ValueError("groups must share a dimension")
    p = a.shape[1]
    n1, n2 = len(a), len(b)
    if min(n1, n2) < 3:
        raise ValueError("each group needs at least 3 points")
    if n1 + n2 - p - 1 < 1:
        raise ValueError("too few points for the F approximation")
    pooled = ((n1 - 1) * np.cov(a, rowvar=False) + (n2 - 1) * np.cov(b, rowvar=False)) / (n1 + n2 - 2)
    pooled = np.atleast_2d(pooled)
    if np.linalg.matrix_rank(pooled) < p or np.linalg.cond(pooled) > 1e12:
        raise np.linalg.LinAlgError(
            "pooled covariance is singular; add jitter or drop a constant dimension"
        )
    diff = a.mean(axis=0) - b.mean(axis=0)
    t2 = float(n1 * n2 / (n1 + n2) * diff @ np.linalg.solve(pooled, diff))
    t2 = max(t2, 0.0)
    df1, df2 = p, n1 + n2 - p - 1
    f = t2 * df2 / ((n1 + n2 - 2) * p)
    return SeparationTest(pair, t2, f, (df1, df2), f_sf(f, df1, df2))


@dataclass
class ClusterReport:
    k: int
    seed: int
    restarts: int
    client_ids: list[str]
    labels: np.ndarray
    names: list[str]
    raw_means: np.ndarray
    fractions: np.ndarray
    counts: np.ndarray
    centers_std: np.ndarray
    inertia: float
    n_iter: int
    converged: bool
    tests_raw: list[SeparationTest]
    tests_std: list[SeparationTest]


def cluster_population(
    X,
    client_ids: Sequence[str] | None = None,
    k: int = 3,
    seed: int = 0,
    restarts: int = 10,
    max_iter: int = 300,
) -> ClusterReport:
    """Standardize, cluster, label and test every cluster pair on raw and z-scored features."""
    X = check_array(X, dtype=float)
    scaler = ZScoreScaler().fit(X)
    Z = scaler.transform(X)
    model = KMeans(k, seed, restarts, max_iter).fit(Z)
    counts = np.bincount(model.labels_, minlength=k)
    raw_means = np.array([X[model.labels_ == j].mean(axis=0) for j in range(k)])
    names = label_clusters(raw_means) if k == 3 else None
    if names is None:
        names = [f"cluster{j}" for j in range(k)]
    tests_raw, tests_std = [], []
    for i in range(k):
        for j in range(i + 1, k):
            pair = (names[i], names[j])
            for src, out in ((X, tests_raw), (Z, tests_std)):
                try:
                    out.append(hotelling_t2(src[model.labels_ == i], src[model.labels_ == j], pair))
                except (ValueError, np.linalg.LinAlgError) as exc:
                    logger.warning("Hotelling test %s vs %s skipped: %s", *pair, exc)
    ids = list(client_ids) if client_ids is not None else [str(i) for i in range(len(X))]
    return ClusterReport(
        k, seed, restarts, ids, model.labels_, names, raw_means, counts / len(X), counts,
        model.cluster_centers_, model.inertia_, model.n_iter_, model.converged_,
        tests_raw, tests_std,
    )

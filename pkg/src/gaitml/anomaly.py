"""K-means anomaly scoring in normalized feature space.

A point's score is ``min_j ||x - c_j|| / r_j - 1`` where ``r_j`` is cluster
j's radius. Negative scores fall inside a learned cluster and count as normal.

The radius defaults to the largest member-to-centroid distance. With the mean
distance instead, roughly half of unseen normal points land outside their
cluster and score positive, so ``radius="mean"`` is only kept for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gaitml.errors import DimensionMismatch, GaitError, TooFewPoints

RADIUS_FLOOR = 1e-6
RADIUS_MODES = ("max", "mean")


@dataclass(frozen=True, eq=False)
class AnomalyModel:
    centroids: np.ndarray  # (k, dim)
    radii: np.ndarray  # (k,)
    # per-iteration inertia from the fit, kept for diagnostics only
    inertia_history: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        c = np.array(self.centroids, dtype=np.float64)
        r = np.array(self.radii, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1 or r.shape != (c.shape[0],):
            raise GaitError("centroids must be (k, dim) with one radius per centroid")
        if np.any(r < RADIUS_FLOOR):
            raise GaitError(f"radii must be >= {RADIUS_FLOOR}")
        c.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "radii", r)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - c[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            i = rng.choice(n, p=d2 / total)
        else:
            i = rng.integers(n)
        centers.append(x[i])
        d2 = np.minimum(d2, np.sum((x - x[i]) ** 2, axis=1))
    return np.array(centers)


def fit_kmeans(
    train,
    k: int = 8,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
    radius: str = "max",
) -> AnomalyModel:
    """Lloyd's algorithm from k-means++ seeds.

    Stops after ``max_iter`` iterations or once no centroid moves more than
    ``tol``. An emptied cluster keeps its previous centroid. Radii are the
    max (or mean) member distance of the final assignment, floored at 1e-6.
    """
    if radius not in RADIUS_MODES:
        raise GaitError(f"radius must be one of {RADIUS_MODES}, got {radius!r}")
    x = np.asarray(train, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch("training points must be a 2-D array")
    if k < 1:
        raise GaitError("k must be >= 1")
    if x.shape[0] < k:
        raise TooFewPoints(f"need at least k={k} points, got {x.shape[0]}")
    rng = np.random.default_rng(seed)
    c = _kmeans_pp(x, k, rng)
    history = []
    for _ in range(max_iter):
        assign = np.argmin(_sq_dists(x, c), axis=1)
        history.append(float(np.sum((x - c[assign]) ** 2)))
        new = c.copy()
        for j in range(k):
            members = x[assign == j]
            if len(members):
                new[j] = members.mean(axis=0)
        moved = np.max(np.linalg.norm(new - c, axis=1))
        c = new
        if moved < tol:
            break
    assign = np.argmin(_sq_dists(x, c), axis=1)
    dist = np.linalg.norm(x - c[assign], axis=1)
    history.append(float(np.sum(dist**2)))
    reduce = np.max if radius == "max" else np.mean
    radii = np.full(k, RADIUS_FLOOR)
    for j in range(k):
        members = dist[assign == j]
        if len(members):
            radii[j] = max(float(reduce(members)), RADIUS_FLOOR)
    return AnomalyModel(c, radii, tuple(history))


def anomaly_score(m: AnomalyModel, x) -> float | np.ndarray:
    """Score one normalized vector, or each row of a 2-D array."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != m.dim or x.ndim not in (1, 2):
        raise DimensionMismatch(f"expected {m.dim} features, got shape {x.shape}")
    rows = np.atleast_2d(x)
    d = np.sqrt(_sq_dists(rows, m.centroids))
    score = np.min(d / m.radii, axis=1) - 1.0
    return float(score[0]) if x.ndim == 1 else score

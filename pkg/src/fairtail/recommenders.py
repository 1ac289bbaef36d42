"""Five recommenders behind one fit / score / recommend contract.

UserKNN (cosine user-user collaborative filtering), NMF (non-negative
factorization trained by multiplicative updates on observed entries),
UserItemAvg (global + user + item average baseline), MostPop and Random.

Every ranking breaks ties by ascending item index.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from fairtail.dataset import InteractionMatrix
from fairtail.errors import (
    ConfigError,
    IndexOutOfRange,
    InsufficientData,
    ScoreUndefined,
    ZeroVector,
)

MASK64 = (1 << 64) - 1


class Algorithm(str, Enum):
    USERKNN = "UserKNN"
    NMF = "NMF"
    USERITEMAVG = "UserItemAvg"
    MOSTPOP = "MostPop"
    RANDOM = "Random"

    @classmethod
    def parse(cls, value: "str | Algorithm") -> "Algorithm":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for alg in cls:
            if alg.value.lower() == key:
                return alg
        names = ", ".join(a.value.lower() for a in cls)
        raise ConfigError(f"unknown algorithm {value!r} (expected one of {names})")

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class RecommenderConfig:
    algorithm: Algorithm
    k: int = 40
    factors: int = 15
    epochs: int = 50
    reg: float = 0.06
    seed: int = 0
    n: int = 10
    exclude_seen: bool = True
    # MostPop serves one global list unless this is set
    popular_exclude_seen: bool = False

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm))
        for name in ("k", "factors", "epochs", "n"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not (math.isfinite(self.reg) and self.reg >= 0):
            raise ConfigError(f"reg must be >= 0, got {self.reg!r}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed <= MASK64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["algorithm"] = self.algorithm.value
        return d


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def user_subseed(master_seed: int, user: int) -> int:
    """Per-user seed, a pure function of (master seed, user index)."""
    return splitmix64(splitmix64(master_seed & MASK64) ^ (user & MASK64))


TIE_DIGITS = 12


def tie_key(scores: np.ndarray) -> np.ndarray:
    """Scores rounded to ``TIE_DIGITS`` significant digits of the largest one.

    Ranking on this key makes scores that are equal up to floating-point
    noise (e.g. 3.0 vs 3.0000000000000004) fall back to the index tie-break.
    """
    finite = np.abs(scores[np.isfinite(scores)])
    top = finite.max() if finite.size else 0.0
    if top == 0:
        return scores
    return np.round(scores, TIE_DIGITS - int(math.ceil(math.log10(top))))


def _ranked(scores: np.ndarray, candidates: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Top ``n`` of ``candidates`` by descending score, ascending index on ties.

    Returns (items, keys) where keys are the rounded scores used for ranking,
    so they are non-increasing.
    """
    if candidates.size == 0:
        return candidates, np.zeros(0)
    keys = tie_key(scores[candidates])
    order = np.lexsort((candidates, -keys))[:n]
    return candidates[order], keys[order]


def similarity(matrix: InteractionMatrix, u: int, v: int) -> float:
    """Cosine similarity of two users' sparse rating vectors.

    Missing entries count as zero. The dot product is summed in ascending
    item order, so ``similarity(m, u, v) == similarity(m, v, u)`` exactly.
    """
    _check_user(matrix, u)
    _check_user(matrix, v)
    if u == v:
        raise ValueError("similarity is defined for two distinct users")
    iu, ru = matrix.row(u)
    iv, rv = matrix.row(v)
    if iu.size == 0 or iv.size == 0:
        raise ZeroVector(f"user {matrix.users[u if iu.size == 0 else v]!r} has no interactions")
    _, pu, pv = np.intersect1d(iu, iv, assume_unique=True, return_indices=True)
    dot = float(np.sum(ru[pu] * rv[pv]))
    nu = float(np.sum(ru * ru))
    nv = float(np.sum(rv * rv))
    return min(1.0, max(0.0, dot / math.sqrt(nu * nv)))


def _check_user(matrix: InteractionMatrix, user: int):
    if not 0 <= user < matrix.n_users:
        raise IndexOutOfRange(f"user index {user} out of range [0, {matrix.n_users})")


def _check_item(matrix: InteractionMatrix, item: int):
    if not 0 <= item < matrix.n_items:
        raise IndexOutOfRange(f"item index {item} out of range [0, {matrix.n_items})")


class FittedModel:
    """Base class for fitted recommenders. State is read-only after fit."""

    algorithm: Algorithm

    def __init__(self, config: RecommenderConfig, matrix: InteractionMatrix):
        self.config = config
        self.matrix = matrix

    def score(self, user: int, item: int) -> float:
        _check_user(self.matrix, user)
        _check_item(self.matrix, item)
        return float(self._score_items(user)[item])

    def score_items(self, user: int) -> np.ndarray:
        """Predicted score for every item for ``user``."""
        _check_user(self.matrix, user)
        return self._score_items(user)

    def _score_items(self, user: int) -> np.ndarray:
        raise NotImplementedError

    def candidates(self, user: int, exclude_seen: bool) -> np.ndarray:
        all_items = np.arange(self.matrix.n_items)
        if not exclude_seen:
            return all_items
        seen, _ = self.matrix.row(user)
        mask = np.ones(self.matrix.n_items, dtype=bool)
        mask[seen] = False
        return all_items[mask]

    def recommend(self, user: int, config: RecommenderConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Ranked (items, scores) for ``user``; at most ``config.n`` entries."""
        config = config or self.config
        _check_user(self.matrix, user)
        return _ranked(self._score_items(user), self.candidates(user, config.exclude_seen), config.n)


class UserKNN(FittedModel):
    algorithm = Algorithm.USERKNN

    def __init__(self, config: RecommenderConfig, matrix: InteractionMatrix):
        super().__init__(config, matrix)
        if matrix.n_users < 2:
            raise InsufficientData("UserKNN needs at least 2 users")
        X = matrix.csr
        gram = (X @ X.T).toarray()
        gram = (gram + gram.T) / 2.0
        sq = np.diag(gram).copy()
        if np.any(sq <= 0):
            u = int(np.flatnonzero(sq <= 0)[0])
            raise ZeroVector(f"user {matrix.users[u]!r} has no interactions")
        sims = np.clip(gram / np.sqrt(np.outer(sq, sq)), 0.0, 1.0)
        np.fill_diagonal(sims, -1.0)

        k = min(config.k, matrix.n_users - 1)
        # stable sort: equal similarities keep ascending user index
        order = np.argsort(-sims, axis=1, kind="stable")[:, :k]
        neighbors, weights = [], []
        for u in range(matrix.n_users):
            nb = order[u]
            w = sims[u, nb]
            keep = w > 0
            neighbors.append(_ro(nb[keep]))
            weights.append(_ro(w[keep]))
        self.neighbors = tuple(neighbors)
        self.weights = tuple(weights)

        counts = np.diff(X.tocsc().indptr)
        self.global_mean = float(X.data.mean())
        sums = np.asarray(X.sum(axis=0)).ravel()
        item_means = np.full(matrix.n_items, self.global_mean)
        np.divide(sums, counts, out=item_means, where=counts > 0)
        self.item_means = _ro(item_means)

    def _score_items(self, user: int) -> np.ndarray:
        nb, w = self.neighbors[user], self.weights[user]
        if nb.size == 0:
            return self.item_means.copy()
        block = self.matrix.csr[nb]
        num = block.T @ w
        den = (block > 0).astype(np.float64).T @ w
        out = self.item_means.copy()
        rated = den > 0
        out[rated] = num[rated] / den[rated]
        return out


class NMF(FittedModel):
    """Non-negative factorization ``R ~ P Q^T`` fitted on observed entries only.

    Each epoch applies the regularized multiplicative update to ``P`` with
    ``Q`` fixed, then to ``Q`` with the new ``P``. Both steps are
    non-increasing in::

        sum_observed (r - P_u . Q_i)^2 + reg * (|P|^2 + |Q|^2)

    ``objective_history`` holds that value after initialization and after
    each epoch; ``min_factor_history`` the smallest factor entry per epoch.
    """

    algorithm = Algorithm.NMF

    def __init__(self, config: RecommenderConfig, matrix: InteractionMatrix):
        super().__init__(config, matrix)
        R = matrix.csr
        Rt = R.T.tocsr()
        f, reg = config.factors, config.reg
        rng = np.random.default_rng(config.seed)
        tiny = np.finfo(np.float64).tiny
        P = np.maximum(rng.random((matrix.n_users, f)), tiny) / math.sqrt(f)
        Q = np.maximum(rng.random((matrix.n_items, f)), tiny) / math.sqrt(f)

        rows = np.repeat(np.arange(matrix.n_users), np.diff(R.indptr))
        cols = R.indices
        r = R.data

        def estimates():
            return np.einsum("ij,ij->i", P[rows], Q[cols])

        def objective(est):
            return float(np.sum((r - est) ** 2) + reg * (np.sum(P * P) + np.sum(Q * Q)))

        history = [objective(estimates())]
        min_factor = []
        for _ in range(config.epochs):
            E = sp.csr_matrix((estimates(), R.indices, R.indptr), shape=R.shape)
            P *= _safe_ratio(R @ Q, E @ Q + reg * P)
            E = sp.csr_matrix((estimates(), R.indices, R.indptr), shape=R.shape)
            Q *= _safe_ratio(Rt @ P, E.T @ P + reg * Q)
            history.append(objective(estimates()))
            min_factor.append(float(min(P.min(), Q.min())))

        self.P = _ro(P)
        self.Q = _ro(Q)
        self.objective_history = tuple(history)
        self.min_factor_history = tuple(min_factor)

    def _score_items(self, user: int) -> np.ndarray:
        return self.Q @ self.P[user]

    def score(self, user: int, item: int) -> float:
        _check_user(self.matrix, user)
        _check_item(self.matrix, item)
        return float(np.dot(self.P[user], self.Q[item]))


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.ones_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


class UserItemAvg(FittedModel):
    """Predicts ``mu + (user_mean - mu) + (item_mean - mu)``."""

    algorithm = Algorithm.USERITEMAVG

    def __init__(self, config: RecommenderConfig, matrix: InteractionMatrix):
        super().__init__(config, matrix)
        X = matrix.csr
        self.global_mean = float(X.data.mean())
        mu = self.global_mean
        ucount = np.diff(X.indptr)
        icount = np.diff(X.tocsc().indptr)
        user_means = np.full(matrix.n_users, mu)
        item_means = np.full(matrix.n_items, mu)
        np.divide(np.asarray(X.sum(axis=1)).ravel(), ucount, out=user_means, where=ucount > 0)
        np.divide(np.asarray(X.sum(axis=0)).ravel(), icount, out=item_means, where=icount > 0)
        self.user_means = _ro(user_means)
        self.item_means = _ro(item_means)

    def _score_items(self, user: int) -> np.ndarray:
        mu = self.global_mean
        return mu + (self.user_means[user] - mu) + (self.item_means - mu)


class MostPop(FittedModel):
    """Same top-n list by total play count for every user."""

    algorithm = Algorithm.MOSTPOP

    def __init__(self, config: RecommenderConfig, matrix: InteractionMatrix):
        super().__init__(config, matrix)
        self.popularity = _ro(np.asarray(matrix.csr.sum(axis=0)).ravel())
        self.ranking = _ro(_ranked(self.popularity, np.arange(matrix.n_items), matrix.n_items)[0])

    def _score_items(self, user: int) -> np.ndarray:
        return self.popularity.copy()

    def recommend(self, user, config=None):
        config = config or self.config
        _check_user(self.matrix, user)
        if config.popular_exclude_seen:
            seen, _ = self.matrix.row(user)
            items = self.ranking[~np.isin(self.ranking, seen)][: config.n]
        else:
            items = self.ranking[: config.n]
        return items, self.popularity[items]


class RandomRecommender(FittedModel):
    """Uniform sample without replacement from each user's candidates."""

    algorithm = Algorithm.RANDOM

    def __init__(self, config: RecommenderConfig, matrix: InteractionMatrix):
        super().__init__(config, matrix)
        self.seed = config.seed

    def score(self, user, item):
        raise ScoreUndefined("the Random recommender does not score items")

    def score_items(self, user):
        raise ScoreUndefined("the Random recommender does not score items")

    def recommend(self, user, config=None):
        config = config or self.config
        _check_user(self.matrix, user)
        cand = self.candidates(user, config.exclude_seen)
        rng = np.random.default_rng(user_subseed(self.seed, user))
        items = rng.choice(cand, size=min(config.n, cand.size), replace=False) if cand.size else cand
        return items, np.zeros(items.size)


_MODELS = {
    Algorithm.USERKNN: UserKNN,
    Algorithm.NMF: NMF,
    Algorithm.USERITEMAVG: UserItemAvg,
    Algorithm.MOSTPOP: MostPop,
    Algorithm.RANDOM: RandomRecommender,
}


def _ro(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.flags.writeable = False
    return a


def fit(config: RecommenderConfig, matrix: InteractionMatrix) -> FittedModel:
    if matrix.nnz == 0:
        raise InsufficientData("cannot fit on an empty matrix")
    return _MODELS[config.algorithm](config, matrix)


def score(model: FittedModel, user: int, item: int) -> float:
    return model.score(user, item)


def recommend(model: FittedModel, user: int, config: RecommenderConfig | None = None) -> np.ndarray:
    return model.recommend(user, config)[0]


@dataclass(frozen=True, eq=False)
class RecommendationSet:
    """Ranked top-n lists, one per user (index-aligned with ``user_ids``)."""

    algorithm: Algorithm
    items: tuple[np.ndarray, ...]
    scores: tuple[np.ndarray, ...]
    user_ids: tuple[str, ...] = field(repr=False)
    item_ids: tuple[str, ...] = field(repr=False)

    def __len__(self):
        return len(self.items)

    def __eq__(self, other):
        if not isinstance(other, RecommendationSet):
            return NotImplemented
        return (
            self.algorithm == other.algorithm
            and len(self.items) == len(other.items)
            and all(np.array_equal(a, b) for a, b in zip(self.items, other.items))
            and all(np.array_equal(a, b) for a, b in zip(self.scores, other.scores))
        )

    def slot_counts(self, n_items: int) -> np.ndarray:
        """Number of list slots each item occupies across all users."""
        if not self.items:
            return np.zeros(n_items, dtype=np.int64)
        return np.bincount(np.concatenate(self.items).astype(np.int64), minlength=n_items)

    def to_tsv(self) -> str:
        lines = []
        for u, (items, scores) in enumerate(zip(self.items, self.scores)):
            for rank, (i, s) in enumerate(zip(items.tolist(), scores.tolist()), start=1):
                lines.append(f"{self.user_ids[u]}\t{rank}\t{self.item_ids[i]}\t{float(s)!r}\n")
        return "".join(lines)


def recommend_all(
    model: FittedModel,
    config: RecommenderConfig | None = None,
    workers: int = 1,
) -> RecommendationSet:
    """Recommend for every user. Output does not depend on ``workers``."""
    config = config or model.config
    users = range(model.matrix.n_users)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda u: model.recommend(u, config), users))
    else:
        results = [model.recommend(u, config) for u in users]
    return RecommendationSet(
        algorithm=model.algorithm,
        items=tuple(_ro(np.asarray(items, dtype=np.int64)) for items, _ in results),
        scores=tuple(_ro(np.asarray(s, dtype=np.float64)) for _, s in results),
        user_ids=model.matrix.users,
        item_ids=model.matrix.items,
    )

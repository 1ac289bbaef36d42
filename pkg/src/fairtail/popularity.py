"""Provider popularity shares and the Head / Mid / Tail split."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from fairtail.dataset import InteractionMatrix, ItemProviderMap
from fairtail.errors import ConfigError, DataError, DegeneratePartition
from fairtail.recommenders import RecommendationSet

GROUP_NAMES = ("High-P", "Mid-P", "Low-P")
DEFAULT_BOUNDARIES = (0.3, 0.7)


@dataclass(frozen=True, eq=False)
class PopularityTable:
    """Per-provider counts and their normalized shares.

    ``side`` is ``"data"`` (play events) or ``"recommendations"`` (list slots).
    """

    counts: np.ndarray
    side: str = "data"

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("counts must be a non-empty 1-d array")
        if counts.min() < 0:
            raise ValueError("counts must be non-negative")
        if counts.sum() <= 0:
            raise DataError(f"{self.side} popularity has zero total")
        if self.side not in ("data", "recommendations"):
            raise ValueError(f"unknown side {self.side!r}")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def shares(self) -> np.ndarray:
        return self.counts / self.total

    def __len__(self):
        return int(self.counts.size)

    def descending_order(self) -> np.ndarray:
        """Provider indices by descending count, ascending index on ties."""
        idx = np.arange(self.counts.size)
        return np.lexsort((idx, -self.counts))


def _integral(values: np.ndarray) -> np.ndarray:
    rounded = np.rint(values)
    if not np.allclose(values, rounded, rtol=0, atol=1e-6):
        raise DataError("popularity needs raw integer play counts; got scaled values")
    return rounded.astype(np.int64)


def compute_popularity(matrix: InteractionMatrix, provider_map: ItemProviderMap) -> PopularityTable:
    """Play events per provider, summed over the provider's items."""
    if provider_map.n_items != matrix.n_items:
        raise ValueError("provider map does not match the matrix item count")
    item_counts = _integral(np.asarray(matrix.csr.sum(axis=0), dtype=np.float64).ravel())
    counts = np.bincount(provider_map.item_provider, weights=item_counts, minlength=provider_map.n_providers)
    return PopularityTable(_integral(counts), side="data")


def recommendation_popularity(recs: RecommendationSet, provider_map: ItemProviderMap) -> PopularityTable:
    """List slots per provider across all users; unrecommended providers get 0."""
    slots = recs.slot_counts(provider_map.n_items)
    if slots.sum() == 0:
        raise DataError("recommendation set is empty")
    counts = np.bincount(provider_map.item_provider, weights=slots, minlength=provider_map.n_providers)
    return PopularityTable(_integral(counts), side="recommendations")


def validate_boundaries(boundaries) -> tuple[float, float]:
    try:
        b1, b2 = (float(b) for b in boundaries)
    except (TypeError, ValueError):
        raise ConfigError(f"boundaries must be two numbers, got {boundaries!r}") from None
    if not (0 < b1 < b2 < 1) or not (math.isfinite(b1) and math.isfinite(b2)):
        raise ConfigError(f"boundaries must satisfy 0 < beta1 < beta2 < 1, got ({b1}, {b2})")
    return b1, b2


@dataclass(frozen=True, eq=False)
class GroupPartition:
    """Disjoint High-P / Mid-P / Low-P provider sets (sorted index arrays)."""

    head: np.ndarray
    mid: np.ndarray
    tail: np.ndarray
    boundaries: tuple[float, float]

    def groups(self) -> dict[str, np.ndarray]:
        return dict(zip(GROUP_NAMES, (self.head, self.mid, self.tail)))

    def sizes(self) -> tuple[int, int, int]:
        return (self.head.size, self.mid.size, self.tail.size)

    def labels(self, n_providers: int) -> list[str]:
        out = [""] * n_providers
        for name, members in self.groups().items():
            for p in members.tolist():
                out[p] = name
        return out

    def as_sets(self) -> tuple[frozenset, frozenset, frozenset]:
        return tuple(frozenset(g.tolist()) for g in (self.head, self.mid, self.tail))


def partition_long_tail(table: PopularityTable, boundaries=DEFAULT_BOUNDARIES) -> GroupPartition:
    """Split providers at cumulative-share cutting points.

    With providers sorted by descending count, the head is the shortest prefix
    whose share reaches ``beta1``; the mid group is the shortest following
    segment that brings the cumulative share to ``beta2``; the rest is tail.
    Comparisons against the cutting points are exact.
    """
    b1, b2 = validate_boundaries(boundaries)
    if table.side != "data":
        raise ValueError("partition the data-side popularity table")
    order = table.descending_order()
    cum = np.cumsum(table.counts[order])
    total = int(cum[-1])

    def cut(beta: float) -> int:
        # smallest prefix reaching beta * total, beta read as the decimal it prints as
        need = math.ceil(Fraction(repr(beta)) * total)
        return int(np.searchsorted(cum, need, side="left")) + 1

    h = cut(b1)
    m = max(cut(b2), h)
    head, mid, tail = order[:h], order[h:m], order[m:]
    for name, g in zip(GROUP_NAMES, (head, mid, tail)):
        if g.size == 0:
            raise DegeneratePartition(
                f"{name} group is empty for boundaries ({b1}, {b2}) over {len(table)} providers"
            )
    return GroupPartition(np.sort(head), np.sort(mid), np.sort(tail), (b1, b2))


def popularity_rows(table: PopularityTable, names) -> list[tuple[int, str, int, float, float]]:
    """(rank, provider, count, share, cumulative_share) in descending order."""
    order = table.descending_order()
    counts = table.counts[order]
    cum = np.cumsum(counts)
    total = table.total
    return [
        (rank, names[p], int(c), int(c) / total, int(cc) / total)
        for rank, (p, c, cc) in enumerate(zip(order.tolist(), counts.tolist(), cum.tolist()), start=1)
    ]

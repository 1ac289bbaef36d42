"""Group Average Popularity (GAP), its relative change between training data
and recommendations, and the multi-algorithm audit that reports both."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from fairtail.dataset import InteractionMatrix, ItemProviderMap, ScalingScheme, scale_ratings
from fairtail.errors import ConfigError, EmptyGroup, ZeroBaseGap
from fairtail.popularity import (
    DEFAULT_BOUNDARIES,
    GROUP_NAMES,
    GroupPartition,
    PopularityTable,
    compute_popularity,
    partition_long_tail,
    recommendation_popularity,
    validate_boundaries,
)
from fairtail.recommenders import (
    Algorithm,
    RecommendationSet,
    RecommenderConfig,
    fit,
    recommend_all,
)

logger = logging.getLogger(__name__)

ALL_ALGORITHMS = tuple(Algorithm)
# trained on raw counts regardless of the scaling scheme
COUNT_BASED = (Algorithm.MOSTPOP, Algorithm.RANDOM)


def gap(group: Iterable[int], table: PopularityTable) -> float:
    """Mean share over the members of ``group``."""
    members = np.fromiter(group, dtype=np.int64)
    if members.size == 0:
        raise EmptyGroup("GAP is undefined for an empty group")
    if members.min() < 0 or members.max() >= len(table):
        raise IndexError("group member outside the popularity table")
    return float(table.shares[members].mean())


def delta_gap(gap_rec: float, gap_data: float) -> float:
    """Relative change of GAP from data to recommendations.

    Positive values mean the group is over-promoted, negative values that it
    is under-represented; -1 means the group was never recommended.
    """
    if gap_data == 0:
        raise ZeroBaseGap("data-side GAP is zero")
    return (gap_rec - gap_data) / gap_data


@dataclass(frozen=True)
class AuditConfig:
    recommenders: tuple[RecommenderConfig, ...]
    boundaries: tuple[float, float] = DEFAULT_BOUNDARIES
    scaling: ScalingScheme = ScalingScheme.RAW
    provider_mode: str = "identity"
    seed: int = 0
    n: int = 10

    def __post_init__(self):
        if not self.recommenders:
            raise ConfigError("an audit needs at least one algorithm")
        object.__setattr__(self, "recommenders", tuple(self.recommenders))
        object.__setattr__(self, "boundaries", validate_boundaries(self.boundaries))
        object.__setattr__(self, "scaling", ScalingScheme.parse(self.scaling))
        if self.provider_mode not in ("identity", "map"):
            raise ConfigError(f"provider_mode must be 'identity' or 'map', got {self.provider_mode!r}")
        algs = [rc.algorithm for rc in self.recommenders]
        if len(set(algs)) != len(algs):
            raise ConfigError("each algorithm may appear only once in an audit")

    @classmethod
    def build(
        cls,
        algorithms: Sequence["str | Algorithm"] = ALL_ALGORITHMS,
        *,
        seed: int = 0,
        n: int = 10,
        k: int = 40,
        factors: int = 15,
        epochs: int = 50,
        reg: float = 0.06,
        exclude_seen: bool = True,
        boundaries=DEFAULT_BOUNDARIES,
        scaling="raw",
        provider_mode: str = "identity",
    ) -> "AuditConfig":
        """One config per algorithm, all sharing the master seed and ``n``."""
        recs = tuple(
            RecommenderConfig(
                Algorithm.parse(a), k=k, factors=factors, epochs=epochs, reg=reg,
                seed=seed, n=n, exclude_seen=exclude_seen,
            )
            for a in algorithms
        )
        return cls(recs, boundaries=boundaries, scaling=scaling, provider_mode=provider_mode, seed=seed, n=n)

    def to_dict(self) -> dict:
        return {
            "algorithms": [rc.algorithm.value for rc in self.recommenders],
            "recommenders": [rc.to_dict() for rc in self.recommenders],
            "boundaries": list(self.boundaries),
            "scaling": self.scaling.value,
            "provider_mode": self.provider_mode,
            "seed": self.seed,
            "n": self.n,
        }


@dataclass(frozen=True)
class GapCell:
    algorithm: str
    group: str
    size: int
    gap_data: float
    gap_rec: float
    delta_gap: float


@dataclass
class GapReport:
    cells: list[GapCell]
    diagnostics: dict[str, dict]
    config: AuditConfig
    partition: GroupPartition
    recommendations: dict[str, RecommendationSet] = field(default_factory=dict, repr=False)

    def cell(self, algorithm: "str | Algorithm", group: str) -> GapCell:
        name = Algorithm.parse(algorithm).value
        for c in self.cells:
            if c.algorithm == name and c.group == group:
                return c
        raise KeyError((name, group))

    def delta(self, algorithm: "str | Algorithm", group: str) -> float:
        return self.cell(algorithm, group).delta_gap

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["algorithm", "group", "gap_data", "gap_rec", "delta_gap"])
        for c in self.cells:
            w.writerow([c.algorithm, c.group, repr(c.gap_data), repr(c.gap_rec), repr(c.delta_gap)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        algorithms = []
        for rc in self.config.recommenders:
            name = rc.algorithm.value
            groups = {
                c.group: {"size": c.size, "gap_data": c.gap_data, "gap_rec": c.gap_rec, "delta_gap": c.delta_gap}
                for c in self.cells if c.algorithm == name
            }
            algorithms.append({"algorithm": name, "groups": groups, "diagnostics": self.diagnostics[name]})
        return {
            "algorithms": algorithms,
            "partition": dict(zip(GROUP_NAMES, self.partition.sizes())),
            "config": self.config.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def summary(self) -> str:
        """Plain-text table of delta GAP per algorithm and group."""
        width = max(len(rc.algorithm.value) for rc in self.config.recommenders)
        lines = ["algorithm".ljust(width) + "".join(f"{g:>12}" for g in GROUP_NAMES)]
        for rc in self.config.recommenders:
            name = rc.algorithm.value
            lines.append(name.ljust(width) + "".join(f"{self.delta(name, g):>12.4f}" for g in GROUP_NAMES))
        return "\n".join(lines)


def _group_cells(name: str, partition: GroupPartition, data: PopularityTable, rec: PopularityTable) -> list[GapCell]:
    cells = []
    for group, members in partition.groups().items():
        gd = gap(members, data)
        gr = gap(members, rec)
        cells.append(GapCell(name, group, int(members.size), gd, gr, delta_gap(gr, gd)))
    return cells


def audit(
    matrix: InteractionMatrix,
    provider_map: ItemProviderMap,
    config: AuditConfig,
    workers: int = 1,
) -> GapReport:
    """Fit every configured algorithm and report GAP / delta GAP per group.

    ``matrix`` must hold raw play counts: provider popularity is computed from
    it, and rating-based algorithms are trained on its scaled copy. The result
    does not depend on ``workers``.
    """
    data_table = compute_popularity(matrix, provider_map)
    partition = partition_long_tail(data_table, config.boundaries)
    scaled = scale_ratings(matrix, config.scaling)

    cells: list[GapCell] = []
    diagnostics: dict[str, dict] = {}
    recommendations: dict[str, RecommendationSet] = {}
    for rc in config.recommenders:
        name = rc.algorithm.value
        logger.info("fitting %s", name)
        model = fit(rc, matrix if rc.algorithm in COUNT_BASED else scaled)
        recs = recommend_all(model, rc, workers=workers)
        rec_table = recommendation_popularity(recs, provider_map)
        cells.extend(_group_cells(name, partition, data_table, rec_table))
        diagnostics[name] = {
            "coverage": float(np.count_nonzero(rec_table.counts) / len(rec_table)),
            "recommended_slots": rec_table.total,
            "n": rc.n,
            "seed": rc.seed,
            "boundaries": list(config.boundaries),
        }
        recommendations[name] = recs
    return GapReport(cells, diagnostics, config, partition, recommendations)

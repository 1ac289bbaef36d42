"""Provider-side popularity bias auditing for recommender systems."""

from fairtail.dataset import (
    InteractionMatrix,
    InteractionRecord,
    ItemProviderMap,
    build_matrix,
    generate_synthetic,
    identity_provider_map,
    load_provider_map,
    parse_interactions,
    scale_ratings,
)
from fairtail.fairness import AuditConfig, GapReport, audit, delta_gap, gap
from fairtail.popularity import (
    GroupPartition,
    PopularityTable,
    compute_popularity,
    partition_long_tail,
    recommendation_popularity,
)
from fairtail.recommenders import (
    Algorithm,
    RecommendationSet,
    RecommenderConfig,
    fit,
    recommend_all,
    similarity,
)

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "AuditConfig",
    "GapReport",
    "GroupPartition",
    "InteractionMatrix",
    "InteractionRecord",
    "ItemProviderMap",
    "PopularityTable",
    "RecommendationSet",
    "RecommenderConfig",
    "audit",
    "build_matrix",
    "compute_popularity",
    "delta_gap",
    "fit",
    "gap",
    "generate_synthetic",
    "identity_provider_map",
    "load_provider_map",
    "parse_interactions",
    "partition_long_tail",
    "recommend_all",
    "recommendation_popularity",
    "scale_ratings",
    "similarity",
]

"""hedgepath: probability calibration for hedged radiology findings and
rule-based diagnostic pathway expansion.

Two halves share one data model: a pairwise-comparison skill-rating pipeline
that turns hedging language into calibrated probabilities, and an expansion
framework that reconstructs sub-findings implied by stated diagnoses along
expert-defined pathway DAGs.
"""

from .model import (
    ComparisonRecord,
    FindingRecord,
    HedgingPhrase,
    Rating,
    Source,
    Status,
    Winner,
    validate_record,
)
from .rating import RatingConfig, draw_probability, update
from .ranking import (
    FitConfig,
    FitTarget,
    ReferenceRanking,
    SigmoidMap,
    Vocabulary,
    build_reference_ranking,
    build_vocabulary,
    calibrate_sigmoid,
    fit_item,
    map_probability,
    rank_of,
)
from .pathway import (
    PathwayDictionary,
    PathwayNode,
    PathwayVariant,
    load_dictionary,
    match,
    normalize,
    parse_pathway,
    serialize_pathway,
)
from .expand import (
    BlacklistRule,
    Conflict,
    coverage_stats,
    deduplicate,
    detect_conflicts,
    expand_finding,
    resolve_conflicts,
    run_pipeline,
)

__version__ = "0.1.0"

__all__ = [
    "BlacklistRule",
    "ComparisonRecord",
    "Conflict",
    "FindingRecord",
    "FitConfig",
    "FitTarget",
    "HedgingPhrase",
    "PathwayDictionary",
    "PathwayNode",
    "PathwayVariant",
    "Rating",
    "RatingConfig",
    "ReferenceRanking",
    "SigmoidMap",
    "Source",
    "Status",
    "Vocabulary",
    "Winner",
    "build_reference_ranking",
    "build_vocabulary",
    "calibrate_sigmoid",
    "coverage_stats",
    "deduplicate",
    "detect_conflicts",
    "draw_probability",
    "expand_finding",
    "fit_item",
    "load_dictionary",
    "map_probability",
    "match",
    "normalize",
    "parse_pathway",
    "rank_of",
    "resolve_conflicts",
    "run_pipeline",
    "serialize_pathway",
    "update",
    "validate_record",
]

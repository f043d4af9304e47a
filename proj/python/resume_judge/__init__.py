"""Few-shot LLM resume judging: Python bindings over the C++ core."""

from ._core import (
    Error,
    IntegrityError,
    InfeasibleSpecError,
    MissingStageError,
    ParseError,
    Pipeline,
    StaleArtifactError,
    ValidationError,
    accuracy,
    disagreement_rate,
    diversity_ranks,
    ingest,
    low_quota,
    mock_judge,
    parse_verdict,
    rank_by_similarity,
    read_verdicts,
    select,
    stages,
    synthetic_corpus,
    timing_report,
)

__all__ = [
    "Error",
    "IntegrityError",
    "InfeasibleSpecError",
    "MissingStageError",
    "ParseError",
    "Pipeline",
    "StaleArtifactError",
    "ValidationError",
    "accuracy",
    "disagreement_rate",
    "diversity_ranks",
    "ingest",
    "low_quota",
    "mock_judge",
    "parse_verdict",
    "rank_by_similarity",
    "read_verdicts",
    "select",
    "stages",
    "synthetic_corpus",
    "timing_report",
]

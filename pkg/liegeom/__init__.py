"""
Lie geometry package for SIMLab.
Induced vector fields, bracket evaluation and Lie-closure rank estimates.
"""

from .spectral import SpectralRank, spectral_rank, CONFIDENT_GAP
from .fields import Base, Bracket, FieldExpr, eval_field, field_jvp
from .rank import (
    LieSpanConfig, LieSpanReport, lie_span_rank, predicted_leaf_dim,
    enumerate_fields, count_fields,
)

__all__ = [
    "SpectralRank", "spectral_rank", "CONFIDENT_GAP",
    "Base", "Bracket", "FieldExpr", "eval_field", "field_jvp",
    "LieSpanConfig", "LieSpanReport", "lie_span_rank", "predicted_leaf_dim",
    "enumerate_fields", "count_fields",
]

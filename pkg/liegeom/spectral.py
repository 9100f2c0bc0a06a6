"""
Numerical rank from singular values.
Shared by the Lie-closure rank estimate and the Gram-matrix independence oracle.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import svdvals

from utils.errors import NumericError

# gap ratio at which a rank decision counts as confident
CONFIDENT_GAP = 1e4


@dataclass(frozen=True)
class SpectralRank:
    """SVD rank evidence for one matrix."""
    rank: int
    singular_values: Tuple[float, ...]
    gap_ratio: float
    rank_tol: float

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "singular_values": list(self.singular_values),
            "gap_ratio": self.gap_ratio,
            "rank_tol": self.rank_tol,
        }


def spectral_rank(matrix: np.ndarray, rank_tol: float = 1e-8) -> SpectralRank:
    """
    rank = #{s_i > rank_tol * s_1}, 0 when s_1 = 0.

    gap_ratio is s_rank / s_{rank+1}; it is +inf when there is no next singular
    value or the next one is exactly zero.
    """
    if rank_tol <= 0:
        raise ValueError(f"rank_tol must be positive, got {rank_tol}")
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return SpectralRank(0, (), float("inf"), rank_tol)
    if not np.all(np.isfinite(matrix)):
        raise NumericError("matrix handed to spectral_rank has non-finite entries")

    s = svdvals(matrix)  # descending
    top = s[0]
    rank = 0 if top == 0.0 else int(np.count_nonzero(s > rank_tol * top))

    if rank == 0 or rank >= len(s) or s[rank] == 0.0:
        gap = float("inf")
    else:
        gap = float(s[rank - 1] / s[rank])
    return SpectralRank(rank, tuple(float(v) for v in s), gap, rank_tol)

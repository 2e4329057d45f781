"""Combining a global class prediction with an aggregated part prediction.

The combination rule is the geometric mean of the two probability vectors,
renormalized; averaging the two cross-entropy losses is numerically the
same thing at the loss level, and final_loss exposes that identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

_LOG_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ProbVector:
    """Class probabilities: non-negative entries summing to 1 within 1e-9."""

    probs: np.ndarray = field()

    def __post_init__(self):
        arr = np.ascontiguousarray(self.probs, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise InputError(f"ProbVector must be a non-empty 1-d vector, got shape {arr.shape}")
        if not np.isfinite(arr).all() or (arr < 0).any():
            raise InputError("ProbVector entries must be finite and non-negative")
        if abs(float(arr.sum()) - 1.0) > 1e-9:
            raise InputError(f"ProbVector must sum to 1, got {float(arr.sum())!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def __len__(self) -> int:
        return self.probs.size


def _check_label(p: ProbVector, y: int) -> int:
    y = int(y)
    if not (0 <= y < len(p)):
        raise InputError(f"class index {y} out of range for {len(p)} classes")
    return y


def cross_entropy(p: ProbVector, y: int) -> float:
    """Negative log probability of the true class, floored at 1e-12 before the log."""
    y = _check_label(p, y)
    return float(-np.log(max(p.probs[y], _LOG_FLOOR)))


def final_loss(p: ProbVector, q: ProbVector, y: int) -> float:
    """Mean of the two cross-entropies; equals -log sqrt(p[y] * q[y])."""
    if len(p) != len(q):
        raise InputError(f"predictions disagree on class count: {len(p)} vs {len(q)}")
    return 0.5 * (cross_entropy(p, y) + cross_entropy(q, y))


def fuse_geometric(p: ProbVector, q: ProbVector) -> ProbVector:
    """Elementwise sqrt(p*q), renormalized to sum 1.

    Disjoint supports make every product zero; that degenerate case falls
    back to the uniform distribution.
    """
    if len(p) != len(q):
        raise InputError(f"predictions disagree on class count: {len(p)} vs {len(q)}")
    r = np.sqrt(p.probs * q.probs)
    total = float(r.sum())
    if total == 0.0:
        return ProbVector(np.full(len(p), 1.0 / len(p)))
    return ProbVector(r / total)

"""Evidence fusion: synergy-augmented Choquet integral and baseline aggregators."""

from __future__ import annotations

import math
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .domain import EvidenceBundle, ProbTriple, Verdict

# identity indices inside a triple
BEFORE, AFTER, SIMULTANEOUS = 0, 1, 2
FORWARD_OPT, REVERSE_OPT, NONE_OPT = 0, 1, 2


class AggregatorChoice(str, Enum):
    CHOQUET = "choquet"
    WEIGHTED_AVERAGE = "wavg"
    EXP_WEIGHTED_AVERAGE = "expavg"
    EINSTEIN = "einstein"


def fuzzy_measure(subset: Iterable[int], a: float, b: float, confidences: Sequence[float]) -> float:
    """``min(1, a*|S| + b * sum of confidences in S)``; the empty set maps to 0."""
    idx = list(subset)
    if not idx:
        return 0.0
    return min(1.0, a * len(idx) + b * sum(confidences[j] for j in idx))


def sort_permutation(weighted: Sequence[float]) -> np.ndarray:
    """Ascending order; ties keep the lower identity index first."""
    return np.argsort(np.asarray(weighted, dtype=float), kind="stable")


def choquet_fuse(
    raw: Sequence[float],
    direction_w: Sequence[float],
    a: float = 0.5,
    b: float = 0.4,
    alpha: float = 0.3,
) -> float:
    """Fuse ``raw`` confidences along one causal direction.

    The direction weights are applied to the identity-ordered vector, the
    weighted values are sorted ascending, and each sorted value is multiplied
    by the marginal measure of its tail set plus ``alpha`` times the pairwise
    synergy of the weighted values in that tail set. The measure is evaluated
    on the raw (unweighted) confidences, so it stays monotone.

    Works for any length; the pipeline uses 9.
    """
    x = np.asarray(raw, dtype=float)
    w = np.asarray(direction_w, dtype=float)
    if x.ndim != 1 or x.shape != w.shape:
        raise ValueError(f"raw and direction_w must be 1-D of equal length, got {x.shape} and {w.shape}")
    n = x.size
    if n == 0:
        return 0.0
    if a < 0 or b < 0 or np.any(x < 0):
        raise ValueError("a, b and raw confidences must be non-negative")
    if a * n + b * x.sum() < 1.0 - 1e-12:
        raise ValueError(
            f"fuzzy measure not normalized: a*n + b*sum(u) = {a * n + b * x.sum():.6g} < 1"
        )

    weighted = x * w
    order = sort_permutation(weighted)
    xs = weighted[order]
    us = x[order]

    # tail aggregates for S_i = {sigma(i), ..., sigma(n)}
    tail_u = np.cumsum(us[::-1])[::-1]
    tail_x = np.cumsum(xs[::-1])[::-1]
    tail_x2 = np.cumsum((xs * xs)[::-1])[::-1]
    sizes = np.arange(n, 0, -1, dtype=float)

    mu = np.minimum(1.0, a * sizes + b * tail_u)
    mu_next = np.append(mu[1:], 0.0)
    synergy = 0.5 * (tail_x * tail_x - tail_x2)
    return float(np.sum(xs * (mu - mu_next + alpha * synergy)))


def entropy_weights(distributions: Sequence[ProbTriple]) -> tuple[float, ...]:
    """Per-source weight proportional to the Shannon entropy of its distribution.

    High-entropy sources receive more weight, as the formula is written. All
    zero entropy falls back to uniform weights.
    """
    entropies = []
    for dist in distributions:
        entropies.append(-sum(p * math.log(p) for p in dist.as_tuple() if p > 0.0))
    total = sum(entropies)
    k = len(entropies)
    if total <= 0.0:
        return tuple(1.0 / k for _ in range(k))
    return tuple(h / total for h in entropies)


def baseline_fuse(
    choice: AggregatorChoice | str,
    scores: Sequence[float],
    weights: Sequence[float],
    epsilon: float = 1e-6,
) -> float:
    choice = AggregatorChoice(choice)
    if len(scores) != len(weights):
        raise ValueError("scores and weights must have equal length")
    if choice is AggregatorChoice.WEIGHTED_AVERAGE:
        return float(sum(w * s for w, s in zip(weights, scores)))
    if choice is AggregatorChoice.EXP_WEIGHTED_AVERAGE:
        # undefined for non-positive scores; clamp from below
        return float(math.prod(max(s, epsilon) ** w for w, s in zip(weights, scores)))
    if choice is AggregatorChoice.EINSTEIN:
        num = sum(w * s for w, s in zip(weights, scores))
        return float(num / (1.0 + math.prod(w * s for w, s in zip(weights, scores))))
    raise ValueError("baseline_fuse does not handle the Choquet aggregator; use choquet_fuse")


def meda_decide(bundle: EvidenceBundle) -> Verdict:
    """Unanimity rule over the argmax of each main-task distribution.

    Simultaneity is temporally compatible with either direction.
    """
    t, n, u = bundle.t.argmax(), bundle.n.argmax(), bundle.u.argmax()
    if t in (BEFORE, SIMULTANEOUS) and n == FORWARD_OPT and u == FORWARD_OPT:
        return Verdict.FORWARD
    if t in (AFTER, SIMULTANEOUS) and n == REVERSE_OPT and u == REVERSE_OPT:
        return Verdict.REVERSE
    return Verdict.NONE

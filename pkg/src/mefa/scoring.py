"""Directional evidence scores and auxiliary factors for one event pair.

Scores are not probabilities: an intra-sentence score is ``w_d * f + A`` and
can exceed 1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .domain import DependencyLevel, EvidenceBundle, MefaConfig, Scope


@dataclass(frozen=True)
class DirectionalScores:
    s_temp: float
    s_temp_rev: float
    s_nec: float
    s_nec_rev: float
    s_suf: float
    s_suf_rev: float

    def forward(self) -> tuple[float, float, float]:
        return (self.s_temp, self.s_nec, self.s_suf)

    def reverse(self) -> tuple[float, float, float]:
        return (self.s_temp_rev, self.s_nec_rev, self.s_suf_rev)


@dataclass(frozen=True)
class AuxFactors:
    w_d: float
    A: float
    c: int


def directional_scores(bundle: EvidenceBundle) -> DirectionalScores:
    t_bef, t_aft, t_sim = bundle.t.as_tuple()
    n_nec, n_rev, n_none = bundle.n.as_tuple()
    u_suf, u_rev, u_none = bundle.u.as_tuple()
    return DirectionalScores(
        s_temp=t_bef + t_sim - t_aft,
        s_temp_rev=t_aft + t_sim - t_bef,
        s_nec=n_nec - n_none,
        s_nec_rev=n_rev - n_none,
        s_suf=u_suf - u_none,
        s_suf_rev=u_rev - u_none,
    )


def dependency_weight(level: DependencyLevel | str, beta: float) -> float:
    if beta <= 0:
        raise ValueError("beta must be positive")
    level = DependencyLevel(level)
    return {
        DependencyLevel.STRONG: 1.0,
        DependencyLevel.MEDIUM: 2 * beta,
        DependencyLevel.WEAK: beta,
        DependencyLevel.NONE: 0.5 * beta,
    }[level]


def _clue_pattern(clue: str) -> re.Pattern:
    words = clue.split()
    return re.compile(r"(?<!\w)" + r"\s+".join(map(re.escape, words)) + r"(?!\w)", re.IGNORECASE)


def clue_in_context(clue: str, context: str) -> bool:
    """Whole-token, case-insensitive occurrence of a (possibly multi-word) clue."""
    if not clue.split():
        return False
    return _clue_pattern(clue).search(context) is not None


def clue_term(clues: Sequence[str], context: str, delta: float) -> float:
    """``delta`` when clues were returned and every one of them occurs in the context."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if not clues:
        return 0.0
    return delta if all(clue_in_context(c, context) for c in clues) else 0.0


def aux_factors(bundle: EvidenceBundle, context: str, config: MefaConfig) -> AuxFactors:
    return AuxFactors(
        w_d=dependency_weight(bundle.d, config.beta),
        A=clue_term(bundle.clues, context, config.delta),
        c=int(bundle.coref),
    )


def pair_scores(
    factors: AuxFactors, fused_fwd: float, fused_rev: float, scope: Scope | str
) -> tuple[float, float]:
    """``(s_cause, s_causedby)`` for an intra- or inter-sentence pair."""
    scope = Scope(scope)
    if scope is Scope.INTRA:
        return (factors.w_d * fused_fwd + factors.A, factors.w_d * fused_rev + factors.A)
    if scope is Scope.INTER:
        k = (1 - factors.c) * factors.w_d
        return (k * fused_fwd, k * fused_rev)
    raise ValueError("pair scope must be intra or inter")

"""Thresholding, direction determination and causal graph assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .domain import CausalDecision, CausalGraph, ConfigError, Scope, Verdict


@dataclass(frozen=True)
class PairScope:
    scope: Scope
    distance: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scope", Scope(self.scope))
        if self.scope is Scope.BOTH:
            raise ValueError("a pair is either intra or inter")
        if self.distance < 0:
            raise ValueError("sentence distance must be non-negative")
        if self.scope is Scope.INTRA and self.distance != 0:
            raise ValueError("intra-sentence pairs have distance 0")


def decayed_threshold(theta: float, distance: int, max_distance: int) -> float:
    """``theta * exp(-distance / (2 * max_distance))``."""
    if max_distance <= 0:
        raise ConfigError("max_distance must be positive")
    if distance < 0:
        raise ValueError("distance must be non-negative")
    if distance == 0:
        return theta
    return theta * math.exp(-0.5 * (distance / max_distance))


def determine(s_cause: float, s_causedby: float, threshold: float) -> Verdict:
    # exact ties above threshold carry no direction
    if s_cause >= threshold and s_cause > s_causedby:
        return Verdict.FORWARD
    if s_causedby >= threshold and s_causedby > s_cause:
        return Verdict.REVERSE
    return Verdict.NONE


class _DisjointSet:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: str, y: str) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            # smaller id becomes the root so clusters are stable
            if ry < rx:
                rx, ry = ry, rx
            self.parent[ry] = rx


def coref_clusters(pairs: Iterable[tuple[str, str]]) -> list[frozenset[str]]:
    ds = _DisjointSet()
    for x, y in pairs:
        ds.union(x, y)
    groups: dict[str, set[str]] = {}
    for x in list(ds.parent):
        groups.setdefault(ds.find(x), set()).add(x)
    return sorted((frozenset(g) for g in groups.values() if len(g) > 1), key=lambda g: sorted(g))


def assemble_graph(
    decisions: Sequence[CausalDecision],
    coref_pairs: Iterable[tuple[str, str]] = (),
    nodes: Sequence[str] | None = None,
) -> CausalGraph:
    """Build the causal graph, copying each edge to every coreferent mate.

    Edges are propagated from ``cluster(cause) x cluster(effect)`` and carry
    the originating score; edges inside a cluster are dropped. When the same
    directed edge is produced more than once the highest score is kept.
    """
    coref_pairs = list(coref_pairs)
    clusters = coref_clusters(coref_pairs)
    members = {}
    for cluster in clusters:
        ordered = sorted(cluster)
        for m in ordered:
            members[m] = ordered

    if nodes is None:
        seen = {}
        for d in decisions:
            for x in d.pair:
                seen.setdefault(x, None)
        for x, y in coref_pairs:
            seen.setdefault(x, None)
            seen.setdefault(y, None)
        nodes = list(seen)

    edges: dict[tuple[str, str], float] = {}
    for d in decisions:
        directed = d.directed
        if directed is None:
            continue
        cause, effect = directed
        score = d.s_cause if d.verdict is Verdict.FORWARD else d.s_causedby
        cause_side = members.get(cause, [cause])
        effect_side = members.get(effect, [effect])
        if cause in effect_side:
            continue
        for u in cause_side:
            for v in effect_side:
                key = (u, v)
                if key not in edges or score > edges[key]:
                    edges[key] = score
    return CausalGraph(
        nodes=tuple(nodes),
        edges=tuple((u, v, s) for (u, v), s in edges.items()),
        coref_clusters=tuple(clusters),
    )

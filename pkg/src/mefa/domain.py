"""Shared, immutable, serializable types used across the package.

The nine-entry evidence vector always follows ``EVIDENCE_ORDER``:
temporality (before, after, simultaneous), necessity (precondition,
reverse precondition, none), sufficiency (sufficiency, reverse sufficiency,
none).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any

EVIDENCE_ORDER = (
    "t_bef", "t_aft", "t_sim",
    "n_nec", "n_rev", "n_none",
    "u_suf", "u_rev", "u_none",
)

DEFAULT_W1 = (1.0, -1.0, 0.5, 1.0, 0.0, -0.5, 1.0, 0.0, -0.5)
DEFAULT_W2 = (-1.0, 1.0, 0.5, 0.0, 1.0, -0.5, 0.0, 1.0, -0.5)

SUM_TOLERANCE = 1e-6


class InputError(ValueError):
    """Malformed corpus, document or request data."""


class ConfigError(ValueError):
    """Invalid hyperparameter configuration."""


def dumps_canonical(obj: Any) -> str:
    """Compact JSON with caller-controlled key order (no key sorting)."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


class DependencyLevel(str, Enum):
    STRONG = "strong"
    MEDIUM = "medium"
    WEAK = "weak"
    NONE = "none"


class Verdict(str, Enum):
    FORWARD = "forward"
    REVERSE = "reverse"
    NONE = "none"


class Scope(str, Enum):
    INTRA = "intra"
    INTER = "inter"
    BOTH = "both"


@dataclass(frozen=True)
class EventMention:
    id: str
    trigger: str
    sentence_index: int
    char_span: tuple[int, int] | None = None

    def __post_init__(self):
        if not isinstance(self.sentence_index, int) or self.sentence_index < 0:
            raise InputError(f"event {self.id!r}: sentence_index must be a non-negative int")
        if self.char_span is not None:
            start, end = self.char_span
            if not start < end:
                raise InputError(f"event {self.id!r}: char_span start must be < end")
            object.__setattr__(self, "char_span", (int(start), int(end)))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "trigger": self.trigger,
            "sentence_index": self.sentence_index,
            "char_span": list(self.char_span) if self.char_span is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> EventMention:
        span = d.get("char_span")
        return cls(
            id=str(d["id"]),
            trigger=d["trigger"],
            sentence_index=d["sentence_index"],
            char_span=tuple(span) if span is not None else None,
        )


@dataclass(frozen=True)
class Document:
    id: str
    sentences: tuple[str, ...]
    events: tuple[EventMention, ...]
    gold_relations: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(
            self, "gold_relations", tuple((str(c), str(e)) for c, e in self.gold_relations)
        )
        ids = [e.id for e in self.events]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise InputError(f"document {self.id!r}: duplicate event ids {dup}")
        for ev in self.events:
            if ev.sentence_index >= len(self.sentences):
                raise InputError(
                    f"document {self.id!r}: event {ev.id!r} points at sentence "
                    f"{ev.sentence_index} but only {len(self.sentences)} exist"
                )
        known = set(ids)
        for cause, effect in self.gold_relations:
            if cause not in known or effect not in known:
                raise InputError(
                    f"document {self.id!r}: relation ({cause}, {effect}) references an unknown event"
                )
            if cause == effect:
                raise InputError(f"document {self.id!r}: self-relation on {cause!r}")

    def event(self, event_id: str) -> EventMention:
        for ev in self.events:
            if ev.id == event_id:
                return ev
        raise InputError(f"event {event_id!r} not found in document {self.id!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "sentences": list(self.sentences),
            "events": [e.to_dict() for e in self.events],
            "relations": [{"cause": c, "effect": e} for c, e in self.gold_relations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> Document:
        return cls(
            id=str(d["id"]),
            sentences=tuple(d["sentences"]),
            events=tuple(EventMention.from_dict(e) for e in d.get("events", [])),
            gold_relations=tuple((r["cause"], r["effect"]) for r in d.get("relations", [])),
        )

    def to_json(self) -> str:
        return dumps_canonical(self.to_dict())


@dataclass(frozen=True)
class ProbTriple:
    """Three confidences over one main sub-task's candidate relations.

    Construction does not normalize; see :meth:`normalized`.
    """

    p1: float
    p2: float
    p3: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p1, self.p2, self.p3)

    @property
    def is_valid(self) -> bool:
        vals = self.as_tuple()
        return all(0.0 <= v <= 1.0 for v in vals) and abs(sum(vals) - 1.0) <= SUM_TOLERANCE

    def normalized(self) -> tuple[ProbTriple, bool]:
        """Clamp negatives to zero and rescale to unit sum.

        Returns the repaired triple and whether it had to fall back to uniform.
        """
        vals = [v if math.isfinite(v) and v > 0.0 else 0.0 for v in self.as_tuple()]
        total = sum(vals)
        if total <= 0.0:
            return UNIFORM, True
        if self.is_valid:
            return self, False
        return ProbTriple(*(v / total for v in vals)), False

    @classmethod
    def uniform(cls) -> ProbTriple:
        return cls(1 / 3, 1 / 3, 1 / 3)

    def argmax(self) -> int:
        vals = self.as_tuple()
        return max(range(3), key=lambda i: (vals[i], -i))


UNIFORM = ProbTriple(1 / 3, 1 / 3, 1 / 3)


MAIN_TASK_NAMES = ("temporality", "necessity", "sufficiency")
TASK_NAMES = MAIN_TASK_NAMES + ("dependency", "causal_clue", "coreference")


@dataclass(frozen=True)
class EvidenceBundle:
    """All six sub-task results for one ordered event pair."""

    t: ProbTriple
    n: ProbTriple
    u: ProbTriple
    d: DependencyLevel = DependencyLevel.NONE
    clues: tuple[str, ...] = ()
    coref: bool = False
    rounds_used: int = 1
    degraded: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "d", DependencyLevel(self.d))
        object.__setattr__(self, "clues", tuple(self.clues))
        object.__setattr__(self, "degraded", frozenset(self.degraded))
        if self.rounds_used < 1:
            raise InputError("rounds_used must be >= 1")
        if any(not isinstance(c, str) or not c.strip() for c in self.clues):
            raise InputError("clue entries must be non-empty strings")
        unknown = self.degraded - set(TASK_NAMES)
        if unknown:
            raise InputError(f"unknown degraded task flags {sorted(unknown)}")

    def raw_vector(self) -> tuple[float, ...]:
        return self.t.as_tuple() + self.n.as_tuple() + self.u.as_tuple()

    def to_dict(self) -> dict:
        return {
            "t": list(self.t.as_tuple()),
            "n": list(self.n.as_tuple()),
            "u": list(self.u.as_tuple()),
            "d": self.d.value,
            "clues": list(self.clues),
            "coref": self.coref,
            "rounds_used": self.rounds_used,
            "degraded": sorted(self.degraded),
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvidenceBundle:
        return cls(
            t=ProbTriple(*d["t"]),
            n=ProbTriple(*d["n"]),
            u=ProbTriple(*d["u"]),
            d=DependencyLevel(d["d"]),
            clues=tuple(d["clues"]),
            coref=bool(d["coref"]),
            rounds_used=int(d["rounds_used"]),
            degraded=frozenset(d["degraded"]),
        )


def validate_bundle(bundle: EvidenceBundle) -> EvidenceBundle:
    """Renormalize every triple; zero-mass triples become uniform and are flagged.

    Never raises. Idempotent.
    """
    degraded = set(bundle.degraded)
    repaired = {}
    for name, attr in zip(MAIN_TASK_NAMES, ("t", "n", "u")):
        triple, fell_back = getattr(bundle, attr).normalized()
        repaired[attr] = triple
        if fell_back:
            degraded.add(name)
    return replace(bundle, degraded=frozenset(degraded), **repaired)


@dataclass(frozen=True)
class MefaConfig:
    beta: float = 0.1
    delta: float = 0.6
    theta: float = 0.6
    a: float = 0.5
    b: float = 0.4
    alpha: float = 0.3
    max_distance: int = 10
    w1: tuple[float, ...] = DEFAULT_W1
    w2: tuple[float, ...] = DEFAULT_W2
    rounds: int = 1
    epsilon: float = 1e-6
    concurrency_limit: int = 4
    retries: int = 2
    timeout_seconds: int = 60
    temperature: float = 0.1
    top_p: float = 0.7

    def __post_init__(self):
        object.__setattr__(self, "w1", tuple(float(x) for x in self.w1))
        object.__setattr__(self, "w2", tuple(float(x) for x in self.w2))
        for name in ("beta", "delta", "theta", "a", "b", "alpha"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be a non-negative real, got {v!r}")
        if not 0.0 < self.theta <= 1.0:
            raise ConfigError(f"theta must lie in (0, 1], got {self.theta!r}")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        for name in ("max_distance", "rounds", "concurrency_limit", "retries", "timeout_seconds"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if len(self.w1) != 9 or len(self.w2) != 9:
            raise ConfigError("w1 and w2 must have exactly 9 entries")

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> MefaConfig:
        known = {f.name: f for f in fields(cls)}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in d.items():
            default = known[key].default
            if isinstance(default, tuple):
                if isinstance(value, str):
                    value = [x for x in value.replace(" ", "").split(",") if x]
                kwargs[key] = tuple(float(x) for x in value)
            elif isinstance(default, int):
                try:
                    kwargs[key] = int(value)
                except (TypeError, ValueError):
                    raise ConfigError(f"{key} must be an integer, got {value!r}") from None
            else:
                try:
                    kwargs[key] = float(value)
                except (TypeError, ValueError):
                    raise ConfigError(f"{key} must be a real number, got {value!r}") from None
        return cls(**kwargs)

    def to_text(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            if isinstance(value, list):
                value = ",".join(repr(x) for x in value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> MefaConfig:
        """Parse flat ``key=value`` lines; blank lines and ``#`` comments ignored."""
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
        return cls.from_dict(values)

    @classmethod
    def from_file(cls, path: str | Path) -> MefaConfig:
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class CausalDecision:
    """Verdict for the ordered pair ``(e_i, e_j)``.

    ``FORWARD`` means e_i -> e_j, ``REVERSE`` means e_j -> e_i.
    """

    pair: tuple[str, str]
    verdict: Verdict
    s_cause: float
    s_causedby: float
    threshold_used: float
    doc_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "pair", tuple(self.pair))
        object.__setattr__(self, "verdict", Verdict(self.verdict))
        if self.verdict is Verdict.FORWARD and not (
            self.s_cause >= self.threshold_used and self.s_cause > self.s_causedby
        ):
            raise InputError("forward verdict inconsistent with scores")
        if self.verdict is Verdict.REVERSE and not (
            self.s_causedby >= self.threshold_used and self.s_causedby > self.s_cause
        ):
            raise InputError("reverse verdict inconsistent with scores")

    @property
    def directed(self) -> tuple[str, str] | None:
        if self.verdict is Verdict.FORWARD:
            return self.pair
        if self.verdict is Verdict.REVERSE:
            return (self.pair[1], self.pair[0])
        return None

    def to_dict(self) -> dict:
        # cause/effect name the queried pair; the verdict carries the direction.
        return {
            "doc_id": self.doc_id,
            "cause": self.pair[0],
            "effect": self.pair[1],
            "verdict": self.verdict.value,
            "s_cause": self.s_cause,
            "s_causedby": self.s_causedby,
            "threshold_used": self.threshold_used,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CausalDecision:
        return cls(
            pair=(d["cause"], d["effect"]),
            verdict=Verdict(d["verdict"]),
            s_cause=float(d["s_cause"]),
            s_causedby=float(d["s_causedby"]),
            threshold_used=float(d["threshold_used"]),
            doc_id=d.get("doc_id", ""),
        )


@dataclass(frozen=True)
class CausalGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]
    coref_clusters: tuple[frozenset[str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple((c, e, float(s)) for c, e, s in self.edges))
        object.__setattr__(self, "coref_clusters", tuple(frozenset(c) for c in self.coref_clusters))
        node_set = set(self.nodes)
        seen: set[str] = set()
        cluster_of = {}
        for i, cluster in enumerate(self.coref_clusters):
            if cluster & seen:
                raise InputError("coreference clusters must be disjoint")
            seen |= cluster
            for n in cluster:
                cluster_of[n] = i
        for cause, effect, _ in self.edges:
            if cause not in node_set or effect not in node_set:
                raise InputError(f"edge ({cause}, {effect}) has an endpoint outside the node set")
            if cause in cluster_of and cluster_of.get(cause) == cluster_of.get(effect):
                raise InputError(f"edge ({cause}, {effect}) lies inside a coreference cluster")

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [[c, e, s] for c, e, s in self.edges],
            "coref_clusters": [sorted(c) for c in self.coref_clusters],
        }

    @classmethod
    def from_dict(cls, d: dict) -> CausalGraph:
        return cls(
            nodes=tuple(d["nodes"]),
            edges=tuple((c, e, s) for c, e, s in d["edges"]),
            coref_clusters=tuple(frozenset(c) for c in d["coref_clusters"]),
        )

    def edge_list(self) -> str:
        return "".join(f"{c}\t{e}\t{s!r}\n" for c, e, s in self.edges)


"""Corpus loading, pair enumeration, EI/DI metrics and validation-data generation."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

from .decision import PairScope
from .domain import (
    CausalDecision,
    Document,
    EventMention,
    InputError,
    Scope,
)

log = logging.getLogger(__name__)


class CorpusError(InputError):
    pass


def load_corpus(path: str | Path) -> list[Document]:
    """Read line-delimited canonical documents; blank lines are skipped."""
    docs = []
    seen_ids = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = Document.from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            if doc.id in seen_ids:
                raise CorpusError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
            seen_ids.add(doc.id)
            docs.append(doc)
    return docs


def dump_corpus(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(doc.to_json() + "\n")


def document_order(doc: Document) -> list[EventMention]:
    position = {ev.id: i for i, ev in enumerate(doc.events)}
    return sorted(
        doc.events,
        key=lambda ev: (ev.sentence_index, ev.char_span[0] if ev.char_span else -1, position[ev.id]),
    )


def enumerate_pairs(
    doc: Document, scope: Scope | str = Scope.BOTH
) -> list[tuple[EventMention, EventMention, PairScope]]:
    """Every unordered event pair once, earlier mention first."""
    scope = Scope(scope)
    out = []
    for e1, e2 in combinations(document_order(doc), 2):
        dist = abs(e1.sentence_index - e2.sentence_index)
        kind = Scope.INTRA if dist == 0 else Scope.INTER
        if scope is Scope.BOTH or scope is kind:
            out.append((e1, e2, PairScope(kind, dist)))
    return out


def gold_set(docs: Iterable[Document], scope: Scope | str = Scope.BOTH) -> set[tuple[str, str, str]]:
    """Directed gold relations ``(doc_id, cause, effect)`` restricted to a pair scope."""
    scope = Scope(scope)
    out = set()
    for doc in docs:
        sent = {ev.id: ev.sentence_index for ev in doc.events}
        for c, e in doc.gold_relations:
            intra = sent[c] == sent[e]
            if scope is Scope.BOTH or (scope is Scope.INTRA) == intra:
                out.add((doc.id, c, e))
    return out


class EvalMode(str, Enum):
    EI = "ei"
    DI = "di"


@dataclass(frozen=True)
class MetricsReport:
    mode: EvalMode
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


def _keyed(item) -> tuple[str, str, str]:
    if len(item) == 2:
        return ("", item[0], item[1])
    return tuple(item)


def evaluate(
    gold: Iterable[Sequence[str]],
    predictions: Iterable[CausalDecision],
    mode: EvalMode | str,
) -> MetricsReport:
    """Precision/recall/F1 over causal pairs.

    ``gold`` holds directed ``(cause, effect)`` or ``(doc_id, cause, effect)``
    tuples. EI ignores direction; DI needs the exact direction. Duplicates
    count once and ``none`` verdicts contribute nothing.
    """
    mode = EvalMode(mode)
    gold_d = {_keyed(g) for g in gold}
    pred_d = set()
    for dec in predictions:
        directed = dec.directed
        if directed is not None:
            pred_d.add((dec.doc_id, *directed))
    if mode is EvalMode.EI:
        gold_s = {(d, frozenset((c, e))) for d, c, e in gold_d}
        pred_s = {(d, frozenset((c, e))) for d, c, e in pred_d}
    else:
        gold_s, pred_s = gold_d, pred_d
    tp = len(gold_s & pred_s)
    return MetricsReport(mode, tp=tp, fp=len(pred_s) - tp, fn=len(gold_s) - tp)


def load_predictions(path: str | Path) -> list[CausalDecision]:
    with open(path, encoding="utf-8") as fh:
        return [CausalDecision.from_dict(json.loads(line)) for line in fh if line.strip()]


# --- converters ----------------------------------------------------------------

def convert_maven_ere(record: dict) -> Document:
    """Map one MAVEN-ERE style document onto the canonical schema.

    Each mention becomes an event; causal relations (``CAUSE`` and
    ``PRECONDITION``) link the first mentions of the related events.
    Token offsets are not translated into character spans.
    """
    sentences = record.get("sentences")
    if sentences is None:
        sentences = [" ".join(toks) for toks in record["tokens"]]
    events = []
    first_mention = {}
    for ev in record.get("events", []):
        for i, m in enumerate(ev.get("mention", [])):
            events.append(EventMention(id=str(m["id"]), trigger=m["trigger_word"],
                                       sentence_index=int(m["sent_id"])))
            if i == 0:
                first_mention[ev["id"]] = str(m["id"])
    relations = []
    for kind in ("CAUSE", "PRECONDITION"):
        for c, e in record.get("causal_relations", {}).get(kind, []):
            if c in first_mention and e in first_mention:
                pair = (first_mention[c], first_mention[e])
                if pair[0] != pair[1] and pair not in relations:
                    relations.append(pair)
    return Document(id=str(record["id"]), sentences=tuple(sentences), events=tuple(events),
                    gold_relations=tuple(relations))


# --- validation data ---------------------------------------------------------

_MARKER = re.compile(r"\[EVENT\](.*?)\[/EVENT\]", re.DOTALL)
_SENT_SPLIT = re.compile(r"(?<=[.!?])\s+(?=\S)")


@dataclass(frozen=True)
class Seed:
    cause: str
    effect: str
    sentence: str


def load_seeds(path: str | Path) -> list[Seed]:
    seeds = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                seeds.append(Seed(d["cause"], d["effect"], d["sentence"]))
            except (ValueError, KeyError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return seeds


def _marked_document(doc_id: str, text: str, seed: Seed, split: bool) -> Document:
    """Strip markers from ``text`` and locate the seed's cause/effect mentions."""
    sentences = _SENT_SPLIT.split(text.strip()) if split else [text.strip()]
    events: dict[str, EventMention] = {}
    clean_sentences = []
    for si, sent in enumerate(sentences):
        clean = []
        cursor = 0
        offset = 0
        for m in _MARKER.finditer(sent):
            clean.append(sent[cursor:m.start()])
            offset += m.start() - cursor
            word = m.group(1).strip()
            start = offset
            clean.append(word)
            offset += len(word)
            cursor = m.end()
            for role, target in (("cause", seed.cause), ("effect", seed.effect)):
                if role not in events and word.lower() == target.lower():
                    events[role] = EventMention(f"{doc_id}-{role}", word, si, (start, start + len(word)))
                    break
        clean.append(sent[cursor:])
        clean_sentences.append("".join(clean))
    if set(events) != {"cause", "effect"}:
        # tolerate inflected rewrites (e.g. "death" -> "dead"): take markers in order
        marked = [(si, m) for si, s in enumerate(sentences) for m in _MARKER.finditer(s)]
        if len(marked) < 2:
            raise InputError(f"{doc_id}: text does not mark both events with [EVENT]...[/EVENT]")
        return _fallback_marked(doc_id, sentences, seed)
    return Document(doc_id, tuple(clean_sentences), (events["cause"], events["effect"]),
                    ((events["cause"].id, events["effect"].id),))


def _fallback_marked(doc_id: str, sentences: list[str], seed: Seed) -> Document:
    clean_sentences = []
    found = []
    for si, sent in enumerate(sentences):
        clean = _MARKER.sub(lambda m: m.group(1).strip(), sent)
        clean_sentences.append(clean)
        for m in _MARKER.finditer(sent):
            found.append((si, m.group(1).strip()))
    # the mention nearest in spelling to each seed trigger
    def closest(target: str, pool):
        return max(pool, key=lambda f: _prefix_len(f[1].lower(), target.lower()))
    cause = closest(seed.cause, found)
    effect = closest(seed.effect, [f for f in found if f is not cause])
    ev_c = EventMention(f"{doc_id}-cause", cause[1], cause[0])
    ev_e = EventMention(f"{doc_id}-effect", effect[1], effect[0])
    return Document(doc_id, tuple(clean_sentences), (ev_c, ev_e), ((ev_c.id, ev_e.id),))


def _prefix_len(a: str, b: str) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def _after_label(raw: str, label: str) -> str:
    m = re.search(label + r"\s*:\s*", raw, re.IGNORECASE)
    return raw[m.end():].strip() if m else raw.strip()


_MENTION_ITEM = re.compile(r"\[\s*['\"]?([^\[\],'\"]+?)['\"]?\s*,\s*(\d+)\s*\]")
_BARE_LIST = re.compile(r"\[([^\[\]]*)\]")


def parse_mentions(raw: str, n_sentences: int) -> list[tuple[str, int]]:
    """Mentions as ``(text, sentence_index)``; bare lists map to sentence 0."""
    body = _after_label(raw, r"Annotated Event Mentions")
    items = [(m.group(1).strip(), int(m.group(2))) for m in _MENTION_ITEM.finditer(body)]
    if not items:
        for si, m in enumerate(_BARE_LIST.finditer(body)):
            for word in m.group(1).split(","):
                word = word.strip().strip("'\"")
                if word:
                    items.append((word, min(si, n_sentences - 1)))
    return [(w, i) for w, i in items if 0 <= i < n_sentences]


def _add_mentions(doc: Document, mentions: list[tuple[str, int]]) -> Document:
    events = list(doc.events)
    taken = {(ev.sentence_index, ev.trigger.lower()) for ev in events}
    for k, (word, si) in enumerate(mentions):
        if (si, word.lower()) in taken or word.lower() not in doc.sentences[si].lower():
            continue
        taken.add((si, word.lower()))
        events.append(EventMention(f"{doc.id}-m{k}", word, si))
    return Document(doc.id, doc.sentences, tuple(events), doc.gold_relations)


VALIDATION_TEMPERATURE = 0.7


def generate_validation(
    seeds: Sequence[Seed],
    gateway,
    rewrite: bool = True,
    expand: bool = True,
    extract: bool = False,
) -> list[Document]:
    """Build validation documents from causal seeds.

    Per seed: the original sentence, plus an implicit rewrite and a
    multi-sentence expansion when enabled. With ``extract`` the backend is
    asked for further mentions, added as unlabeled events. A seed whose
    backend call fails is skipped with a warning. The gateway's backend is
    expected to run at ``VALIDATION_TEMPERATURE``.
    """
    from .gateway import GatewayError
    from .prompts import load_validation_template

    def ask(name: str, text: str, seed: Seed) -> str:
        prompt = fill_validation(load_validation_template(name), text, seed)
        return gateway.query_text(prompt, 1, f"{name}:{seed.cause}:{seed.effect}")

    for i, seed in enumerate(seeds):
        if len(_MARKER.findall(seed.sentence)) < 2:
            raise InputError(f"seed {i}: sentence must mark both events with [EVENT]...[/EVENT]")

    docs = []
    for i, seed in enumerate(seeds):
        variants = [(_marked_document(f"seed{i}-orig", seed.sentence, seed, split=False), seed.sentence)]
        try:
            if rewrite:
                text = _after_label(ask("rewrite", seed.sentence, seed), r"Rewritten Sentence")
                variants.append((_marked_document(f"seed{i}-rewrite", text, seed, split=False), text))
            if expand:
                text = _after_label(ask("expand", seed.sentence, seed), r"Expanded Sentences")
                variants.append((_marked_document(f"seed{i}-expand", text, seed, split=True), text))
            if extract:
                variants = [
                    (_add_mentions(doc, parse_mentions(ask("extract", text, seed), len(doc.sentences))), text)
                    for doc, text in variants
                ]
        except (GatewayError, InputError) as exc:
            log.warning("skipping seed %d: %s", i, exc)
            continue
        docs.extend(doc for doc, _ in variants)
    return docs


def fill_validation(template: str, sentence: str, seed: Seed) -> str:
    return (template.replace("{sentence}", sentence)
            .replace("{cause}", seed.cause).replace("{effect}", seed.effect))

"""Prompt rendering for the six sub-tasks and parsing of raw model answers."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .domain import (
    DependencyLevel,
    Document,
    EventMention,
    InputError,
    ProbTriple,
    UNIFORM,
)

TEMPLATE_VERSION = "v1"
_PLACEHOLDER = re.compile(r"\{(context|event1|event2)\}")


class ParseFailure(ValueError):
    """No recognizable answer in a model response."""


class SubTask(str, Enum):
    TEMPORALITY = "temporality"
    NECESSITY = "necessity"
    SUFFICIENCY = "sufficiency"
    DEPENDENCY = "dependency"
    CAUSAL_CLUE = "causal_clue"
    COREFERENCE = "coreference"

    @property
    def is_main(self) -> bool:
        return self in MAIN_TASKS


MAIN_TASKS = (SubTask.TEMPORALITY, SubTask.NECESSITY, SubTask.SUFFICIENCY)
AUX_TASKS = (SubTask.DEPENDENCY, SubTask.CAUSAL_CLUE, SubTask.COREFERENCE)


@dataclass(frozen=True)
class PromptRequest:
    task: SubTask
    context: str
    event1: str
    event2: str
    rendered: str


def load_template(task: SubTask | str, style: str = "mefa", template_dir: str | Path | None = None) -> str:
    """Read a template file; ``style='meda'`` selects the single-choice main-task variants."""
    task = SubTask(task)
    name = f"{task.value}.txt"
    if style == "meda" and task.is_main:
        name = f"meda/{name}"
    elif style not in ("mefa", "meda"):
        raise ValueError(f"unknown template style {style!r}")
    if template_dir is not None:
        return (Path(template_dir) / name).read_text(encoding="utf-8")
    root = resources.files("mefa") / "templates" / TEMPLATE_VERSION
    return root.joinpath(name).read_text(encoding="utf-8")


def load_validation_template(name: str) -> str:
    """Templates for the rewrite / expand / extract validation-data steps."""
    if name not in ("rewrite", "expand", "extract"):
        raise ValueError(f"unknown validation template {name!r}")
    root = resources.files("mefa") / "templates" / TEMPLATE_VERSION / "validation"
    return root.joinpath(f"{name}.txt").read_text(encoding="utf-8")


def pair_context(doc: Document, e1: EventMention, e2: EventMention) -> str:
    """The containing sentence, or the inclusive sentence window spanning both events."""
    lo, hi = sorted((e1.sentence_index, e2.sentence_index))
    return " ".join(doc.sentences[lo:hi + 1])


def fill(template: str, **values: str) -> str:
    # single pass so braces inside the context are never re-substituted
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)], template)


def render(
    task: SubTask | str,
    doc: Document,
    pair: tuple[EventMention, EventMention],
    style: str = "mefa",
    template_dir: str | Path | None = None,
) -> PromptRequest:
    task = SubTask(task)
    e1, e2 = pair
    for ev in (e1, e2):
        if doc.event(ev.id) != ev:
            raise InputError(f"event {ev.id!r} does not match document {doc.id!r}")
    context = pair_context(doc, e1, e2)
    template = load_template(task, style, template_dir)
    rendered = fill(template, context=context, event1=e1.trigger, event2=e2.trigger)
    return PromptRequest(task=task, context=context, event1=e1.trigger, event2=e2.trigger,
                         rendered=rendered)


# --- parsing -----------------------------------------------------------------

_SEP = r"[\s\]\*\"'`]*(?:\([^)\n]{0,80}\))?[\s\]\)\*\"'`:=|]*(?:-\s+)?(?:(?:confidence|probability|prob|score)\s*[:=]?\s*)?[\[\(]?\s*"
_NUM = r"(?P<num>[-+]?(?:\d+(?:\.\d*)?|\.\d+))\s*(?P<pct>%)?"

_LABELS = {
    SubTask.TEMPORALITY: (r"BEFORE", r"AFTER", r"SIMULTANEOUS"),
    SubTask.NECESSITY: (
        r"(?<!REV[_ -])(?<!REVERSE[_ -])(?<!NO[_ -])PRECONDITION",
        r"REV(?:ERSE)?[_ -]PRECONDITION",
        r"(?:NONE|NO[_ -]PRECONDITION)",
    ),
    SubTask.SUFFICIENCY: (
        r"(?<!REV[_ -])(?<!REVERSE[_ -])(?<!NO[_ -])SUFFICIENCY",
        r"REV(?:ERSE)?[_ -]SUFFICIENCY",
        r"(?:NONE|NO[_ -]SUFFICIENCY)",
    ),
}
_VAGUE = r"VAGUE"


def _scored(label: str) -> re.Pattern:
    return re.compile(r"(?<![\w])" + label + r"(?![\w])" + _SEP + _NUM, re.IGNORECASE)


def _bare(label: str) -> re.Pattern:
    # single-choice answers such as "Result: [BEFORE]"
    return re.compile(
        r"(?:result|answer|choice)\s*[:=]?\s*[\[\(\*\"']*\s*" + r"(?<![\w])" + label + r"(?![\w])",
        re.IGNORECASE,
    )


_SCORED = {task: tuple(_scored(lbl) for lbl in labels) for task, labels in _LABELS.items()}
_BARE = {task: tuple(_bare(lbl) for lbl in labels) for task, labels in _LABELS.items()}
_VAGUE_SCORED = _scored(_VAGUE)
_VAGUE_BARE = _bare(_VAGUE)


def _last_value(pattern: re.Pattern, raw: str) -> float | None:
    value = None
    for m in pattern.finditer(raw):
        v = float(m.group("num"))
        value = v / 100.0 if m.group("pct") else v
    return value


def parse_triple(task: SubTask | str, raw: str) -> tuple[ProbTriple, bool]:
    """Parse a main-task answer into a normalized triple plus a degraded flag.

    Labels followed by a number are read as confidences (last occurrence wins;
    a trailing ``%`` divides by 100). Missing labels count as 0. A single-choice
    ``Result: [LABEL]`` answer becomes a one-hot triple. A dominant VAGUE
    answer yields the uniform triple, flagged degraded.
    """
    task = SubTask(task)
    if not task.is_main:
        raise ValueError(f"{task.value} is not a main sub-task")
    if not raw or not raw.strip():
        raise ParseFailure("empty response")
    values = [_last_value(p, raw) for p in _SCORED[task]]
    vague = _last_value(_VAGUE_SCORED, raw) if task is SubTask.TEMPORALITY else None

    if all(v is None for v in values):
        hits = [(m.start(), i) for i, p in enumerate(_BARE[task]) for m in p.finditer(raw)]
        if task is SubTask.TEMPORALITY:
            hits += [(m.start(), 3) for m in _VAGUE_BARE.finditer(raw)]
        if not hits:
            if vague is not None:
                return UNIFORM, True
            raise ParseFailure(f"no {task.value} label with a confidence found")
        _, choice = max(hits)
        if choice == 3:
            return UNIFORM, True
        one_hot = [0.0, 0.0, 0.0]
        one_hot[choice] = 1.0
        return ProbTriple(*one_hot), False

    filled = [v if v is not None else 0.0 for v in values]
    if vague is not None and vague > max(filled):
        return UNIFORM, True
    return ProbTriple(*filled).normalized()


_LEVEL_LINE = re.compile(
    r"(?:dependency|result|answer|level)\s*[:=]?\s*[\[\(\*\"']*\s*(strong|medium|weak|none)\b",
    re.IGNORECASE,
)
_LEVEL_ANY = re.compile(r"\b(strong|medium|weak|none)\b", re.IGNORECASE)


def parse_dependency(raw: str) -> DependencyLevel:
    m = _LEVEL_LINE.search(raw) or _LEVEL_ANY.search(raw)
    if m is None:
        raise ParseFailure("no dependency level found")
    return DependencyLevel(m.group(1).lower())


_CLUE_LINE = re.compile(r"(?:causal\s+)?(?:clue(?:\s+word)?s?|indicators?)\s*[:=]\s*(.*)", re.IGNORECASE)
_EMPTY_CLUES = {"", "none", "n/a", "na", "null", "no", "[]", "nil", "empty"}


def _split_clues(text: str) -> list[str]:
    text = text.strip()
    if text.strip("[]()*. ").lower() in _EMPTY_CLUES:
        return []
    parts = re.split(r"[,;\n]|\s+/\s+", text.strip("[]"))
    clues = []
    for part in parts:
        part = part.strip().strip("[]()*\"'`.- ").strip()
        if part and part.lower() not in _EMPTY_CLUES and part not in clues:
            clues.append(part)
    return clues


def parse_clues(raw: str) -> list[str]:
    """Clue words from a ``Causal Clues: [...]`` line, a bare list, or a bare None."""
    m = _CLUE_LINE.search(raw)
    if m is not None:
        rest = m.group(1)
        if not rest.strip():
            following = [ln for ln in raw[m.end():].splitlines() if ln.strip()]
            rest = following[0] if following else ""
        return _split_clues(rest)
    stripped = raw.strip()
    if stripped.strip("[]()*. ").lower() in _EMPTY_CLUES:
        return []
    if "\n" not in stripped and (stripped.startswith("[") or len(stripped) <= 80):
        return _split_clues(stripped)
    raise ParseFailure("no clue list found")


_YES_NO = re.compile(r"\b(yes|no|true|false)\b", re.IGNORECASE)
_COREF_LINE = re.compile(r"(?:coreference|coreferent|result|answer)\s*[:=]?\s*[\[\(\*\"']*\s*(yes|no|true|false)\b",
                         re.IGNORECASE)


def parse_coreference(raw: str) -> bool:
    m = _COREF_LINE.search(raw) or _YES_NO.search(raw)
    if m is None:
        raise ParseFailure("no yes/no answer found")
    return m.group(1).lower() in ("yes", "true")


def parse(task: SubTask | str, raw: str):
    """Dispatch on task: triple, dependency level, clue list or coreference flag."""
    task = SubTask(task)
    if not raw or not raw.strip():
        raise ParseFailure("empty response")
    if task.is_main:
        return parse_triple(task, raw)[0]
    if task is SubTask.DEPENDENCY:
        return parse_dependency(raw)
    if task is SubTask.CAUSAL_CLUE:
        return parse_clues(raw)
    return parse_coreference(raw)

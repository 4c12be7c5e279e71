"""End-to-end run: evidence gathering, scoring, determination, graphs, manifest."""

from __future__ import annotations

import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .decision import PairScope, assemble_graph
from .domain import (
    CausalDecision,
    CausalGraph,
    ConfigError,
    Document,
    EventMention,
    EvidenceBundle,
    MefaConfig,
    Scope,
    dumps_canonical,
)
from .estimator import MefaClassifier, bundle_features
from .evalbench import enumerate_pairs, evaluate, gold_set
from .gateway import CacheMissError, Gateway, GatewayError, TransportError, gather_evidence
from .prompts import TEMPLATE_VERSION, pair_context

log = logging.getLogger(__name__)

DEFAULT_GRID = {
    "delta": [0.3, 0.4, 0.5, 0.6, 0.7],
    "theta": [0.6, 0.7, 0.8, 0.9],
    "a": [0.3, 0.4, 0.5, 0.6, 0.7],
    "b": [0.2, 0.3, 0.4, 0.5, 0.6],
}
SWEEPABLE = ("beta", "delta", "theta", "a", "b", "alpha", "max_distance")


class IncompleteCacheError(GatewayError):
    def __init__(self, missing: Sequence[tuple[str, str, str]]):
        self.missing = list(missing)
        listing = ", ".join(f"{d}:{a}-{b}" for d, a, b in self.missing[:20])
        more = f" (+{len(self.missing) - 20} more)" if len(self.missing) > 20 else ""
        super().__init__(f"cached evidence missing for {len(self.missing)} pairs: {listing}{more}")


@dataclass(frozen=True)
class PairRecord:
    doc_id: str
    e1: EventMention
    e2: EventMention
    scope: PairScope
    context: str
    bundle: EvidenceBundle

    def to_dict(self) -> dict:
        return {"doc_id": self.doc_id, "e1": self.e1.id, "e2": self.e2.id,
                "scope": self.scope.scope.value, "distance": self.scope.distance,
                "evidence": self.bundle.to_dict()}


@dataclass
class RunResult:
    predictions: list[CausalDecision]
    graphs: dict[str, CausalGraph]
    manifest: dict
    records: list[PairRecord] = field(default_factory=list)


def template_style(aggregator: str) -> str:
    return "meda" if aggregator == "meda" else "mefa"


def collect_evidence(
    docs: Sequence[Document],
    gateway: Gateway,
    config: MefaConfig,
    scope: Scope | str = Scope.BOTH,
    style: str = "mefa",
    template_dir: str | Path | None = None,
    strict_cache: bool = False,
) -> list[PairRecord]:
    """Gather evidence for every enumerated pair, ordered by (doc id, pair order).

    With ``strict_cache`` every cache miss is collected and reported together
    as :class:`IncompleteCacheError`.
    """
    jobs = []
    for doc in sorted(docs, key=lambda d: d.id):
        for e1, e2, ps in enumerate_pairs(doc, scope):
            jobs.append((doc, e1, e2, ps))

    def work(job):
        doc, e1, e2, ps = job
        bundle = gather_evidence(gateway, doc, (e1, e2), config, style, template_dir)
        return PairRecord(doc.id, e1, e2, ps, pair_context(doc, e1, e2), bundle)

    records: list[PairRecord] = []
    missing = []
    with ThreadPoolExecutor(max_workers=config.concurrency_limit) as pool:
        futures = [pool.submit(work, job) for job in jobs]
        try:
            for job, fut in zip(jobs, futures):
                try:
                    records.append(fut.result())
                except CacheMissError:
                    if not strict_cache:
                        raise
                    missing.append((job[0].id, job[1].id, job[2].id))
        except BaseException:
            for fut in futures:
                fut.cancel()
            raise
    if missing:
        raise IncompleteCacheError(missing)
    return records


def decide(records: Sequence[PairRecord], clf: MefaClassifier) -> list[CausalDecision]:
    if not records:
        return []
    X = np.vstack([bundle_features(r.bundle, r.scope, r.context) for r in records])
    scores, thresholds, verdicts = clf.fit(X).score_and_predict(X)
    return [
        CausalDecision(
            pair=(r.e1.id, r.e2.id),
            verdict=v,
            s_cause=float(s[0]),
            s_causedby=float(s[1]),
            threshold_used=float(th),
            doc_id=r.doc_id,
        )
        for r, s, th, v in zip(records, scores, thresholds, verdicts)
    ]


def build_graphs(docs: Sequence[Document], records: Sequence[PairRecord],
                 decisions: Sequence[CausalDecision]) -> dict[str, CausalGraph]:
    by_doc: dict[str, list[CausalDecision]] = {}
    coref: dict[str, list[tuple[str, str]]] = {}
    for r, d in zip(records, decisions):
        by_doc.setdefault(r.doc_id, []).append(d)
        if r.bundle.coref:
            coref.setdefault(r.doc_id, []).append((r.e1.id, r.e2.id))
    return {
        doc.id: assemble_graph(by_doc.get(doc.id, []), coref.get(doc.id, []),
                               nodes=[ev.id for ev in doc.events])
        for doc in sorted(docs, key=lambda d: d.id)
    }


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def write_outputs(out_dir: str | Path, result: RunResult) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for d in result.predictions:
            fh.write(dumps_canonical(d.to_dict()) + "\n")
    with open(out / "graphs.tsv", "w", encoding="utf-8") as fh:
        for doc_id, graph in result.graphs.items():
            for c, e, s in graph.edges:
                fh.write(f"{doc_id}\t{c}\t{e}\t{s!r}\n")
    with open(out / "evidence.jsonl", "w", encoding="utf-8") as fh:
        for r in result.records:
            fh.write(dumps_canonical(r.to_dict()) + "\n")
    write_manifest(out, result.manifest)


def write_manifest(out_dir: str | Path, manifest: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def run_pipeline(
    docs: Sequence[Document],
    config: MefaConfig,
    gateway: Gateway,
    aggregator: str = "choquet",
    scope: Scope | str = Scope.BOTH,
    out_dir: str | Path | None = None,
    corpus_path: str | Path | None = None,
    template_dir: str | Path | None = None,
) -> RunResult:
    scope = Scope(scope)
    style = template_style(aggregator)
    clf = MefaClassifier.from_config(config, aggregator)
    clf._validate_params()
    manifest = {
        "status": "running",
        "started_at": _now(),
        "finished_at": None,
        "config": config.to_dict(),
        "backend": gateway.backend.describe(),
        "corpus": str(corpus_path) if corpus_path is not None else None,
        "aggregator": aggregator,
        "scope": scope.value,
        "template_style": style,
        "template_version": TEMPLATE_VERSION,
        "template_dir": str(template_dir) if template_dir is not None else None,
        "counts": {},
    }
    try:
        records = collect_evidence(docs, gateway, config, scope, style, template_dir)
    except TransportError as exc:
        manifest.update(status="aborted", finished_at=_now(), error=str(exc),
                        counts=dict(gateway.stats))
        if out_dir is not None:
            write_manifest(out_dir, manifest)
        raise
    decisions = decide(records, clf)
    graphs = build_graphs(docs, records, decisions)
    manifest.update(
        status="complete",
        finished_at=_now(),
        counts={
            "documents": len(docs),
            "pairs": len(records),
            "parse_fallbacks": sum(len(r.bundle.degraded) for r in records),
            "cache_hits": gateway.stats["hits"],
            "cache_misses": gateway.stats["misses"],
            "network_calls": gateway.stats["network_calls"],
        },
    )
    result = RunResult(decisions, graphs, manifest, records)
    if out_dir is not None:
        write_outputs(out_dir, result)
    return result


def expand_grid(grid: Mapping[str, Sequence[float]]) -> list[dict]:
    unknown = set(grid) - set(SWEEPABLE)
    if unknown:
        raise ConfigError(f"cannot sweep over {sorted(unknown)}; choose from {SWEEPABLE}")
    keys = list(grid)
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]


def sweep(
    docs: Sequence[Document],
    config: MefaConfig,
    gateway: Gateway,
    grid: Mapping[str, Sequence[float]] | None = None,
    aggregator: str = "choquet",
    scope: Scope | str = Scope.BOTH,
    template_dir: str | Path | None = None,
) -> list[dict]:
    """EI/DI metrics for every grid point, recomputed from cached evidence only."""
    if gateway.backend.kind == "http":
        raise ConfigError("sweep runs from cached or scripted evidence; use a replay backend")
    grid = DEFAULT_GRID if grid is None else grid
    points = expand_grid(grid)
    records = collect_evidence(docs, gateway, config, scope, template_style(aggregator),
                               template_dir, strict_cache=True)
    gold = gold_set(docs, scope)
    rows = []
    for point in points:
        cfg = replace(config, **{k: (int(v) if k == "max_distance" else float(v))
                                 for k, v in point.items()})
        decisions = decide(records, MefaClassifier.from_config(cfg, aggregator))
        row = dict(point)
        for mode in ("ei", "di"):
            m = evaluate(gold, decisions, mode)
            row.update({f"{mode}_p": m.precision, f"{mode}_r": m.recall, f"{mode}_f1": m.f1})
        rows.append(row)
    return rows


def format_table(rows: Sequence[Mapping]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    lines = ["\t".join(cols)]
    for row in rows:
        lines.append("\t".join(f"{row[c]:.4f}" if isinstance(row[c], float) else str(row[c])
                               for c in cols))
    return "\n".join(lines) + "\n"

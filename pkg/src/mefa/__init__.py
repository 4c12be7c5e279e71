"""Zero-shot event causality identification by fuzzy aggregation of LLM sub-task evidence."""

from .aggregation import (
    AggregatorChoice,
    baseline_fuse,
    choquet_fuse,
    entropy_weights,
    fuzzy_measure,
    meda_decide,
)
from .decision import PairScope, assemble_graph, decayed_threshold, determine
from .domain import (
    CausalDecision,
    CausalGraph,
    DependencyLevel,
    Document,
    EventMention,
    EvidenceBundle,
    MefaConfig,
    ProbTriple,
    Scope,
    Verdict,
    validate_bundle,
)
from .estimator import ChoquetFuser, MefaClassifier
from .evalbench import enumerate_pairs, evaluate, load_corpus
from .gateway import BackendSpec, Gateway, gather_evidence
from .pipeline import run_pipeline, sweep
from .prompts import ParseFailure, SubTask, parse, render
from .scoring import clue_term, dependency_weight, directional_scores, pair_scores

__version__ = "0.1.0"

"""scikit-learn estimators over per-pair evidence features.

Each row of ``X`` describes one ordered event pair (see ``FEATURE_NAMES``):
the nine main-task confidences in identity order, the dependency level as an
ordinal (0=none .. 3=strong), whether the returned clue words were verified in
the context, the coreference answer, an inter-sentence flag and the sentence
distance. Nothing is learned; ``fit`` only validates, so the estimators slot
into ``Pipeline``/``GridSearchCV`` for hyperparameter sweeps.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .aggregation import AggregatorChoice, baseline_fuse, choquet_fuse, entropy_weights, meda_decide
from .decision import PairScope, decayed_threshold, determine
from .domain import (
    DEFAULT_W1,
    DEFAULT_W2,
    EVIDENCE_ORDER,
    DependencyLevel,
    EvidenceBundle,
    MefaConfig,
    ProbTriple,
    Scope,
    Verdict,
)
from .scoring import AuxFactors, clue_term, dependency_weight, directional_scores, pair_scores

FEATURE_NAMES = EVIDENCE_ORDER + ("dependency", "clue_verified", "coref", "inter", "distance")
N_FEATURES = len(FEATURE_NAMES)

_LEVEL_CODE = {DependencyLevel.NONE: 0, DependencyLevel.WEAK: 1,
               DependencyLevel.MEDIUM: 2, DependencyLevel.STRONG: 3}
_CODE_LEVEL = {v: k for k, v in _LEVEL_CODE.items()}

AGGREGATORS = tuple(c.value for c in AggregatorChoice) + ("meda",)
CLASSES = np.array([v.value for v in (Verdict.FORWARD, Verdict.NONE, Verdict.REVERSE)])


def bundle_features(bundle: EvidenceBundle, scope: PairScope, context: str) -> np.ndarray:
    clue_ok = clue_term(bundle.clues, context, 1.0)
    return np.array(
        bundle.raw_vector()
        + (
            _LEVEL_CODE[bundle.d],
            clue_ok,
            float(bundle.coref),
            float(scope.scope is Scope.INTER),
            float(scope.distance),
        ),
        dtype=float,
    )


def _row_bundle(row: np.ndarray) -> EvidenceBundle:
    return EvidenceBundle(
        t=ProbTriple(*row[0:3]),
        n=ProbTriple(*row[3:6]),
        u=ProbTriple(*row[6:9]),
        d=_CODE_LEVEL[int(row[9])],
        coref=bool(row[11]),
    )


def _check_features(X) -> np.ndarray:
    X = check_array(X, dtype=float, ensure_all_finite=True, ensure_min_samples=0)
    if X.shape[1] != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} feature columns, got {X.shape[1]}")
    if np.any(X[:, :9] < 0) or np.any(X[:, :9] > 1):
        raise ValueError("confidence columns must lie in [0, 1]")
    if not np.all(np.isin(X[:, 9], (0, 1, 2, 3))):
        raise ValueError("dependency column must be an ordinal in {0, 1, 2, 3}")
    if np.any(X[:, 13] < 0) or np.any((X[:, 12] == 0) & (X[:, 13] != 0)):
        raise ValueError("distance must be non-negative and zero for intra-sentence rows")
    return X


class ChoquetFuser(TransformerMixin, BaseEstimator):
    """Map ``(n, k)`` raw confidences to ``(n, 2)`` fused forward/reverse values."""

    def __init__(self, w1=DEFAULT_W1, w2=DEFAULT_W2, a=0.5, b=0.4, alpha=0.3):
        self.w1 = w1
        self.w2 = w2
        self.a = a
        self.b = b
        self.alpha = alpha

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[1] != len(self.w1) or len(self.w1) != len(self.w2):
            raise ValueError("direction vectors must match the number of columns")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=float)
        out = np.empty((X.shape[0], 2))
        for i, row in enumerate(X):
            out[i, 0] = choquet_fuse(row, self.w1, self.a, self.b, self.alpha)
            out[i, 1] = choquet_fuse(row, self.w2, self.a, self.b, self.alpha)
        return out


class MefaClassifier(ClassifierMixin, BaseEstimator):
    """Zero-shot causal direction classifier over evidence feature rows.

    ``predict`` returns ``"forward"``, ``"reverse"`` or ``"none"`` per row.
    ``decision_function`` returns the ``(s_cause, s_causedby)`` score pair.
    """

    def __init__(
        self,
        beta=0.1,
        delta=0.6,
        theta=0.6,
        a=0.5,
        b=0.4,
        alpha=0.3,
        max_distance=10,
        w1=DEFAULT_W1,
        w2=DEFAULT_W2,
        epsilon=1e-6,
        aggregator="choquet",
    ):
        self.beta = beta
        self.delta = delta
        self.theta = theta
        self.a = a
        self.b = b
        self.alpha = alpha
        self.max_distance = max_distance
        self.w1 = w1
        self.w2 = w2
        self.epsilon = epsilon
        self.aggregator = aggregator

    @classmethod
    def from_config(cls, config: MefaConfig, aggregator: str = "choquet") -> MefaClassifier:
        return cls(
            beta=config.beta, delta=config.delta, theta=config.theta, a=config.a, b=config.b,
            alpha=config.alpha, max_distance=config.max_distance, w1=config.w1, w2=config.w2,
            epsilon=config.epsilon, aggregator=aggregator,
        )

    def _validate_params(self):
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}, got {self.aggregator!r}")
        # reuse the config invariants
        MefaConfig(beta=self.beta, delta=self.delta, theta=self.theta, a=self.a, b=self.b,
                   alpha=self.alpha, max_distance=self.max_distance, w1=self.w1, w2=self.w2,
                   epsilon=self.epsilon)

    def fit(self, X, y=None):
        self._validate_params()
        X = _check_features(X)
        self.n_features_in_ = X.shape[1]
        self.classes_ = CLASSES
        return self

    def _fused(self, bundle: EvidenceBundle) -> tuple[float, float]:
        if self.aggregator == AggregatorChoice.CHOQUET.value:
            raw = bundle.raw_vector()
            return (choquet_fuse(raw, self.w1, self.a, self.b, self.alpha),
                    choquet_fuse(raw, self.w2, self.a, self.b, self.alpha))
        weights = entropy_weights((bundle.t, bundle.n, bundle.u))
        ds = directional_scores(bundle)
        return (baseline_fuse(self.aggregator, ds.forward(), weights, self.epsilon),
                baseline_fuse(self.aggregator, ds.reverse(), weights, self.epsilon))

    def _score_rows(self, X: np.ndarray):
        scores = np.empty((X.shape[0], 2))
        thresholds = np.empty(X.shape[0])
        verdicts = []
        for i, row in enumerate(X):
            bundle = _row_bundle(row)
            inter = bool(row[12])
            scope = PairScope(Scope.INTER if inter else Scope.INTRA, int(row[13]))
            threshold = decayed_threshold(self.theta, scope.distance, self.max_distance)
            if self.aggregator == "meda":
                verdict = meda_decide(bundle)
                # auxiliary evidence vetoes: coreferent inter pairs, no dependency
                if (inter and bundle.coref) or bundle.d is DependencyLevel.NONE:
                    verdict = Verdict.NONE
                s = {Verdict.FORWARD: (1.0, 0.0), Verdict.REVERSE: (0.0, 1.0)}.get(verdict, (0.0, 0.0))
            else:
                factors = AuxFactors(
                    w_d=dependency_weight(bundle.d, self.beta),
                    A=self.delta * row[10],
                    c=int(bundle.coref),
                )
                s = pair_scores(factors, *self._fused(bundle), scope.scope)
                verdict = determine(s[0], s[1], threshold)
            scores[i] = s
            thresholds[i] = threshold
            verdicts.append(verdict.value)
        return scores, thresholds, np.array(verdicts, dtype=object)

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "classes_")
        return self._score_rows(_check_features(X))[0]

    def thresholds(self, X) -> np.ndarray:
        check_is_fitted(self, "classes_")
        return self._score_rows(_check_features(X))[1]

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "classes_")
        return self._score_rows(_check_features(X))[2]

    def score_and_predict(self, X):
        """Scores, decayed thresholds and verdicts in one pass."""
        check_is_fitted(self, "classes_")
        return self._score_rows(_check_features(X))

"""Understanding-state classifiers and their evaluation harness.

Three model families share one protocol: TF-IDF text features feed a bagged
forest and a boosted ensemble, while the fusion head is a multinomial
logistic regression over [text features | three cue values | optional
imported utterance embeddings]. Evaluation reports per-class
precision/recall/F1, macro-F1, accuracy, a gold-by-predicted confusion
matrix, and stratified k-fold mean +/- sample SD.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import STATES
from .errors import ValidationError
from .trees import BoostConfig, BoostedModel, ForestConfig, ForestModel

__all__ = [
    "TextVectorizer",
    "FusionConfig",
    "FusionModel",
    "EvaluationReport",
    "train_forest",
    "train_boosted",
    "train_fusion",
    "stratified_split",
    "kfold_cv",
    "CVMetrics",
    "evaluate",
    "import_embeddings",
    "ForestConfig",
    "BoostConfig",
]

EMBEDDING_FORMAT = "cueload-embeddings"
EMBEDDING_VERSION = 1


class TextVectorizer:
    """TF-IDF with smoothed idf, L2-normalized rows, df-capped vocabulary.

    idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1. When max_features is set,
    terms are kept by highest document frequency, ties broken
    lexicographically; the retained vocabulary is indexed in sorted order.
    """

    def __init__(self, max_features: int | None = None, lowercase: bool = True):
        if max_features is not None and max_features < 1:
            raise ValidationError("max_features must be positive")
        self.max_features = max_features
        self.lowercase = lowercase
        self.vocabulary: dict[str, int] = {}
        self.idf: np.ndarray | None = None

    def _tokenize(self, document: str) -> list[str]:
        if self.lowercase:
            document = document.lower()
        return document.split()

    def fit(self, documents) -> "TextVectorizer":
        documents = list(documents)
        if not documents or not any(self._tokenize(d) for d in documents):
            raise ValidationError("empty fit corpus")
        df: dict[str, int] = {}
        for doc in documents:
            for term in set(self._tokenize(doc)):
                df[term] = df.get(term, 0) + 1
        terms = sorted(df)
        if self.max_features is not None and len(terms) > self.max_features:
            terms = sorted(terms, key=lambda t: (-df[t], t))[: self.max_features]
            terms = sorted(terms)
        self.vocabulary = {t: i for i, t in enumerate(terms)}
        n = len(documents)
        self.idf = np.array(
            [math.log((1 + n) / (1 + df[t])) + 1.0 for t in terms], dtype=np.float64
        )
        return self

    def transform(self, documents) -> np.ndarray:
        if self.idf is None:
            raise ValidationError("vectorizer is not fitted")
        docs = list(documents)
        out = np.zeros((len(docs), len(self.vocabulary)))
        for i, doc in enumerate(docs):
            for term in self._tokenize(doc):
                j = self.vocabulary.get(term)
                if j is not None:
                    out[i, j] += 1.0
        out *= self.idf
        norms = np.linalg.norm(out, axis=1)
        nonzero = norms > 0
        out[nonzero] /= norms[nonzero, None]
        return out

    def fit_transform(self, documents) -> np.ndarray:
        return self.fit(documents).transform(documents)


@dataclass(frozen=True)
class FusionConfig:
    learning_rate: float = 0.5
    max_epochs: int = 500
    tol: float = 1e-6
    weight_decay: float = 0.0
    class_weights: tuple[float, ...] | None = None  # inverse-frequency when enabled
    seed: int = 0

    def validate(self):
        if self.learning_rate <= 0 or self.max_epochs < 0 or self.tol < 0:
            raise ValidationError("fusion config values out of range")


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class FusionModel:
    """Multinomial logistic regression trained by full-batch gradient descent.

    Weights start at zero, so an untrained model outputs the uniform
    distribution; training stops when the cross-entropy improvement drops
    below tol or max_epochs is reached. Fully deterministic.
    """

    def __init__(self, config: FusionConfig = FusionConfig()):
        config.validate()
        self.config = config
        self.weights: np.ndarray | None = None
        self.bias: np.ndarray | None = None
        self.n_classes = 0

    def fit(self, X, y, n_classes):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValidationError("feature matrix and labels do not align")
        self.n_classes = n_classes
        n, d = X.shape
        self.weights = np.zeros((d, n_classes))
        self.bias = np.zeros(n_classes)
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y] = 1.0
        if self.config.class_weights is not None:
            sample_w = np.array(self.config.class_weights)[y]
        else:
            sample_w = np.ones(n)
        w_total = sample_w.sum()

        prev_loss = np.inf
        for _ in range(self.config.max_epochs):
            probs = _softmax(X @ self.weights + self.bias)
            loss = -np.sum(sample_w * np.log(probs[np.arange(n), y] + 1e-300)) / w_total
            loss += 0.5 * self.config.weight_decay * float(np.sum(self.weights**2))
            grad_scores = (probs - onehot) * sample_w[:, None] / w_total
            self.weights -= self.config.learning_rate * (
                X.T @ grad_scores + self.config.weight_decay * self.weights
            )
            self.bias -= self.config.learning_rate * grad_scores.sum(axis=0)
            if prev_loss - loss < self.config.tol:
                break
            prev_loss = loss
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.weights is None:
            raise ValidationError("model is not fitted")
        return _softmax(X @ self.weights + self.bias)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


def train_forest(features, labels, config: ForestConfig, n_classes: int = 4) -> ForestModel:
    return ForestModel(config).fit(features, labels, n_classes)


def train_boosted(features, labels, config: BoostConfig, n_classes: int = 4) -> BoostedModel:
    return BoostedModel(config).fit(features, labels, n_classes)


def train_fusion(
    text_vectors,
    cue_values,
    labels,
    embeddings=None,
    config: FusionConfig = FusionConfig(),
    n_classes: int = 4,
) -> FusionModel:
    """Train the fusion head on [text | cues | embeddings] blocks."""
    X = fuse_features(text_vectors, cue_values, embeddings)
    return FusionModel(config).fit(X, labels, n_classes)


def fuse_features(text_vectors, cue_values, embeddings=None) -> np.ndarray:
    blocks = []
    if text_vectors is not None:
        blocks.append(np.asarray(text_vectors, dtype=np.float64))
    if cue_values is not None:
        blocks.append(np.asarray(cue_values, dtype=np.float64))
    if embeddings is not None:
        blocks.append(np.asarray(embeddings, dtype=np.float64))
    if not blocks:
        raise ValidationError("no feature blocks to fuse")
    rows = {b.shape[0] for b in blocks}
    if len(rows) != 1:
        raise ValidationError(f"feature blocks disagree on record count: {sorted(rows)}")
    return np.hstack(blocks)


def stratified_split(labels, ratio: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic per-class split into (train_idx, test_idx).

    Train sizes follow a largest-remainder allocation of round(ratio * n),
    keeping every class within one record of its exact share.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if not 0.0 < ratio < 1.0:
        raise ValidationError(f"split ratio must be in (0, 1), got {ratio}")
    classes = np.unique(labels)
    counts = {int(c): int(np.sum(labels == c)) for c in classes}
    for c, n_c in counts.items():
        if n_c < 2:
            raise ValidationError(f"class {c} has {n_c} record(s); need at least 2")

    n = labels.size
    target_train = int(math.floor(ratio * n + 0.5))
    base = {c: int(math.floor(ratio * n_c)) for c, n_c in counts.items()}
    remainder = {c: ratio * n_c - base[c] for c in counts}
    extra = target_train - sum(base.values())
    for c in sorted(counts, key=lambda c: (-remainder[c], c)):
        if extra <= 0:
            break
        if base[c] < counts[c]:
            base[c] += 1
            extra -= 1

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    train_parts, test_parts = [], []
    for c in sorted(counts):
        idx = np.flatnonzero(labels == c)
        perm = rng.permutation(idx)
        train_parts.append(perm[: base[c]])
        test_parts.append(perm[base[c] :])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    if train_idx.size == 0 or test_idx.size == 0:
        raise ValidationError("split leaves an empty train or test set")
    return train_idx, test_idx


def stratified_folds(labels, k: int, seed: int) -> list[np.ndarray]:
    """k disjoint validation folds preserving class proportions."""
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise ValidationError(f"need k >= 2 folds, got {k}")
    for c in np.unique(labels):
        if np.sum(labels == c) < k:
            raise ValidationError(f"class {int(c)} has fewer than k={k} records")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    folds: list[list[int]] = [[] for _ in range(k)]
    for c in sorted(int(c) for c in np.unique(labels)):
        idx = rng.permutation(np.flatnonzero(labels == c))
        for i, record in enumerate(idx):
            folds[i % k].append(int(record))
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


@dataclass(frozen=True)
class CVMetrics:
    accuracy_mean: float
    accuracy_sd: float
    macro_f1_mean: float
    macro_f1_sd: float
    fold_accuracy: tuple[float, ...]
    fold_macro_f1: tuple[float, ...]

    def summary(self) -> str:
        return (
            f"acc {self.accuracy_mean:.3f} ± {self.accuracy_sd:.3f}, "
            f"macro-F1 {self.macro_f1_mean:.3f} ± {self.macro_f1_sd:.3f}"
        )


def kfold_cv(labels, k: int, trainer, seed: int, n_classes: int = 4) -> CVMetrics:
    """Stratified k-fold cross-validation.

    trainer(train_idx, eval_idx) must return predictions for eval_idx.
    """
    labels = np.asarray(labels, dtype=np.int64)
    folds = stratified_folds(labels, k, seed)
    accs, f1s = [], []
    for fold in folds:
        mask = np.ones(labels.size, dtype=bool)
        mask[fold] = False
        train_idx = np.flatnonzero(mask)
        preds = np.asarray(trainer(train_idx, fold), dtype=np.int64)
        report = evaluate(preds, labels[fold], n_classes=n_classes)
        accs.append(report.accuracy)
        f1s.append(report.macro_f1)
    acc = np.array(accs)
    f1 = np.array(f1s)
    return CVMetrics(
        accuracy_mean=float(acc.mean()),
        accuracy_sd=float(acc.std(ddof=1)),
        macro_f1_mean=float(f1.mean()),
        macro_f1_sd=float(f1.std(ddof=1)),
        fold_accuracy=tuple(float(a) for a in accs),
        fold_macro_f1=tuple(float(x) for x in f1s),
    )


@dataclass
class EvaluationReport:
    class_names: tuple[str, ...]
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    support: tuple[int, ...]
    undefined: tuple[str, ...]      # "precision:<class>" style flags for 0/0 cases
    macro_f1: float
    accuracy: float
    confusion: tuple[tuple[int, ...], ...]  # rows = gold, columns = predicted
    cv: CVMetrics | None = None
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "class_names": list(self.class_names),
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": list(self.f1),
            "support": list(self.support),
            "undefined": list(self.undefined),
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "confusion": [list(r) for r in self.confusion],
            "config": self.config,
        }
        if self.cv is not None:
            out["cv"] = {
                "accuracy_mean": self.cv.accuracy_mean,
                "accuracy_sd": self.cv.accuracy_sd,
                "macro_f1_mean": self.cv.macro_f1_mean,
                "macro_f1_sd": self.cv.macro_f1_sd,
                "fold_accuracy": list(self.cv.fold_accuracy),
                "fold_macro_f1": list(self.cv.fold_macro_f1),
            }
        return out


def evaluate(predictions, gold, n_classes: int = 4, class_names=None) -> EvaluationReport:
    """Per-class precision/recall/F1, macro-F1, accuracy, confusion matrix."""
    predictions = np.asarray(predictions, dtype=np.int64)
    gold = np.asarray(gold, dtype=np.int64)
    if predictions.shape != gold.shape:
        raise ValidationError(
            f"predictions ({predictions.size}) and gold ({gold.size}) differ in length"
        )
    if class_names is None:
        class_names = STATES[:n_classes] if n_classes <= len(STATES) else tuple(
            f"class{i}" for i in range(n_classes)
        )
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for g, p in zip(gold, predictions):
        confusion[g, p] += 1

    precision, recall, f1, undefined = [], [], [], []
    for c in range(n_classes):
        tp = confusion[c, c]
        pred_c = confusion[:, c].sum()
        gold_c = confusion[c, :].sum()
        if pred_c == 0:
            precision.append(0.0)
            undefined.append(f"precision:{class_names[c]}")
        else:
            precision.append(float(tp / pred_c))
        if gold_c == 0:
            recall.append(0.0)
            undefined.append(f"recall:{class_names[c]}")
        else:
            recall.append(float(tp / gold_c))
        if precision[-1] + recall[-1] == 0:
            f1.append(0.0)
        else:
            f1.append(2 * precision[-1] * recall[-1] / (precision[-1] + recall[-1]))

    return EvaluationReport(
        class_names=tuple(class_names),
        precision=tuple(precision),
        recall=tuple(recall),
        f1=tuple(f1),
        support=tuple(int(confusion[c, :].sum()) for c in range(n_classes)),
        undefined=tuple(undefined),
        macro_f1=float(np.mean(f1)),
        accuracy=float(np.trace(confusion) / gold.size) if gold.size else 0.0,
        confusion=tuple(tuple(int(x) for x in row) for row in confusion),
    )


def import_embeddings(source) -> tuple[int, dict[tuple[str, str], np.ndarray]]:
    """Read the embedding JSONL exchange: header line with the dimension,
    then one {dialogue_id, utterance_id, embedding} record per line."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValidationError("empty embedding file")
    header = json.loads(lines[0])
    if header.get("format") != EMBEDDING_FORMAT or "dim" not in header:
        raise ValidationError("embedding file lacks a valid header line")
    dim = int(header["dim"])
    if dim < 1:
        raise ValidationError(f"bad embedding dimension {dim}")
    records: dict[tuple[str, str], np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        obj = json.loads(line)
        vec = np.asarray(obj["embedding"], dtype=np.float64)
        if vec.shape != (dim,):
            raise ValidationError(
                f"line {lineno}: embedding dimension {vec.shape} != declared {dim}"
            )
        records[(obj["dialogue_id"], obj["utterance_id"])] = vec
    return dim, records

"""Sequence models for word and gaze streams, plus the score-exchange formats.

The built-in model is an add-k n-gram over either normalized word tokens or
gaze labels (stored as strings). BOS pads the left context only; EOS is an
event the model counts and can score, but the headline quantities average
over exactly the observed symbols:

    information value  H = -(1/N) * sum_i log P(w_i | w_<i)   [nats/token]
    gaze entropy     NLL = -(1/T) * sum_i log P(e_i | e_<i)   [nats/label]

Externally produced scores arrive as JSON-lines records carrying one natural
logprob per corpus token (or gaze label); see import_logprobs.
"""

from __future__ import annotations

import json
import math
import unicodedata
from dataclasses import dataclass

from .corpus import GAZE_LABEL_MAX, GAZE_LABEL_MIN, Utterance
from .errors import AlignmentError, UndefinedValueError, ValidationError

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

_FORMAT = "cueload-ngram"
_VERSION = 1


def normalize_token(surface: str) -> str | None:
    """Lowercase and strip edge punctuation/symbols; None when nothing is left.

    Word-internal characters (hyphens included) are kept untouched.
    """
    s = surface.lower()
    start, end = 0, len(s)
    while start < end and unicodedata.category(s[start])[0] in ("P", "S"):
        start += 1
    while end > start and unicodedata.category(s[end - 1])[0] in ("P", "S"):
        end -= 1
    return s[start:end] or None


def normalize_tokens(utterance: Utterance) -> list[str]:
    """Normalized token sequence of an utterance; punctuation-only tokens drop out."""
    out = []
    for token in utterance.tokens:
        norm = normalize_token(token.surface)
        if norm is not None:
            out.append(norm)
    return out


@dataclass(frozen=True)
class TokenLogProbRecord:
    dialogue_id: str
    utterance_id: str
    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]


@dataclass(frozen=True)
class GazeLogProbRecord:
    dialogue_id: str
    utterance_id: str
    labels: tuple[int, ...]
    logprobs: tuple[float, ...]


class NGramModel:
    """Add-k smoothed n-gram model over a closed event set.

    Events are the vocabulary plus UNK and EOS; BOS only appears in contexts.
    Every conditional distribution therefore sums to exactly one and assigns
    positive mass to every event.
    """

    def __init__(self, order: int, k: float, vocabulary, kind: str = "word"):
        if not 1 <= order <= 5:
            raise ValidationError(f"order must be in [1, 5], got {order}")
        if k <= 0:
            raise ValidationError(f"smoothing k must be positive, got {k}")
        self.order = order
        self.k = k
        self.kind = kind
        self.vocabulary = frozenset(vocabulary)
        self.counts: dict[tuple[str, ...], dict[str, int]] = {}
        self._events = sorted(self.vocabulary) + [EOS, UNK]

    @property
    def events(self) -> list[str]:
        return list(self._events)

    def _map(self, symbol: str) -> str:
        if symbol in self.vocabulary or symbol in (EOS, BOS):
            return symbol
        return UNK

    def _pad(self, symbols) -> list[str]:
        return [BOS] * (self.order - 1) + [self._map(s) for s in symbols]

    def observe(self, symbols) -> None:
        """Count all transitions of one sequence, including its EOS."""
        stream = self._pad(symbols) + [EOS]
        n_ctx = self.order - 1
        for i in range(n_ctx, len(stream)):
            ctx = tuple(stream[i - n_ctx:i])
            bucket = self.counts.setdefault(ctx, {})
            bucket[stream[i]] = bucket.get(stream[i], 0) + 1

    def logprob(self, symbol: str, context) -> float:
        """Natural log P(symbol | context); context is the raw preceding symbols."""
        sym = self._map(symbol)
        if sym == BOS:
            raise ValidationError("BOS cannot be scored")
        n_ctx = self.order - 1
        ctx = tuple(([BOS] * n_ctx + [self._map(c) for c in context])[-n_ctx:]) if n_ctx else ()
        bucket = self.counts.get(ctx, {})
        total = sum(bucket.values())
        v = len(self._events)
        return math.log((bucket.get(sym, 0) + self.k) / (total + self.k * v))

    def sequence_logprobs(self, symbols) -> list[float]:
        """Per-symbol logprobs with BOS-padded context, one per input symbol."""
        stream = self._pad(symbols)
        n_ctx = self.order - 1
        out = []
        for i in range(n_ctx, len(stream)):
            out.append(self.logprob(stream[i], stream[max(0, i - n_ctx):i]))
        return out

    def sequence_nll(self, symbols) -> float:
        """Mean NLL over the sequence including its EOS transition (nats)."""
        lps = self.sequence_logprobs(symbols)
        lps.append(self.logprob(EOS, list(symbols)[-(self.order - 1):] if self.order > 1 else []))
        return -sum(lps) / len(lps)

    def conditional_distribution(self, context) -> dict[str, float]:
        """P(event | context) for all events; sums to 1 by construction."""
        n_ctx = self.order - 1
        ctx = tuple(([BOS] * n_ctx + [self._map(c) for c in context])[-n_ctx:]) if n_ctx else ()
        bucket = self.counts.get(ctx, {})
        total = sum(bucket.values())
        v = len(self._events)
        denom = total + self.k * v
        return {e: (bucket.get(e, 0) + self.k) / denom for e in self._events}

    def to_json(self) -> str:
        payload = {
            "format": _FORMAT,
            "version": _VERSION,
            "kind": self.kind,
            "order": self.order,
            "k": self.k,
            "vocabulary": sorted(self.vocabulary),
            "counts": [
                [list(ctx), sorted(bucket.items())]
                for ctx, bucket in sorted(self.counts.items())
            ],
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NGramModel":
        payload = json.loads(text)
        if payload.get("format") != _FORMAT:
            raise ValidationError(f"not a {_FORMAT} dump")
        if payload.get("version") != _VERSION:
            raise ValidationError(f"unsupported model version {payload.get('version')}")
        model = cls(payload["order"], payload["k"], payload["vocabulary"], payload["kind"])
        for ctx, items in payload["counts"]:
            model.counts[tuple(ctx)] = {sym: n for sym, n in items}
        return model

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "NGramModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def train_word_ngram(utterances, order: int = 2, k: float = 0.1) -> NGramModel:
    """Train the word model on normalized tokens of all given utterances."""
    sequences = [normalize_tokens(u) for u in utterances]
    sequences = [s for s in sequences if s]
    if not sequences:
        raise ValidationError("empty training set: no utterance has scoreable tokens")
    vocab = {tok for seq in sequences for tok in seq}
    model = NGramModel(order, k, vocab, kind="word")
    for seq in sequences:
        model.observe(seq)
    return model


def train_gaze_ngram(sequences, order: int = 3, k: float = 0.1) -> NGramModel:
    """Train the gaze model; the vocabulary is the full closed label set 1..81."""
    cleaned = []
    for seq in sequences:
        labels = list(seq)
        for label in labels:
            if not GAZE_LABEL_MIN <= label <= GAZE_LABEL_MAX:
                raise ValidationError(f"gaze label {label} outside the 1..81 range")
        if labels:
            cleaned.append([str(label) for label in labels])
    if not cleaned:
        raise ValidationError("empty training set: no gaze sequences")
    vocab = {str(label) for label in range(GAZE_LABEL_MIN, GAZE_LABEL_MAX + 1)}
    model = NGramModel(order, k, vocab, kind="gaze")
    for seq in cleaned:
        model.observe(seq)
    return model


def information_value(tokens, model: NGramModel) -> float:
    """Mean surprisal of the token sequence under the model (nats/token)."""
    tokens = list(tokens)
    if not tokens:
        raise UndefinedValueError("information value undefined for an empty sequence")
    logprobs = model.sequence_logprobs(tokens)
    return -sum(logprobs) / len(logprobs)


def gaze_entropy(labels, model: NGramModel) -> float:
    """Mean NLL of the gaze label sequence under the model (nats/label)."""
    labels = list(labels)
    if not labels:
        raise UndefinedValueError("gaze entropy undefined for an empty sequence")
    logprobs = model.sequence_logprobs([str(label) for label in labels])
    return -sum(logprobs) / len(logprobs)


def mean_neg_logprob(logprobs) -> float:
    """Average surprisal of imported per-symbol logprobs (nats/symbol)."""
    logprobs = list(logprobs)
    if not logprobs:
        raise UndefinedValueError("no logprobs to average")
    return -sum(logprobs) / len(logprobs)


def _iter_jsonl(source):
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            yield lineno, json.loads(line)


def import_logprobs(source, corpus_tokens=None) -> dict[tuple[str, str], TokenLogProbRecord]:
    """Read token-logprob JSONL; optionally check tokens against the corpus.

    corpus_tokens maps (dialogue_id, utterance_id) to that utterance's
    normalized token list; mismatches raise AlignmentError naming the
    utterance. Length mismatches and positive logprobs are always rejected.
    """
    records: dict[tuple[str, str], TokenLogProbRecord] = {}
    for lineno, obj in _iter_jsonl(source):
        try:
            rec = TokenLogProbRecord(
                dialogue_id=obj["dialogue_id"],
                utterance_id=obj["utterance_id"],
                tokens=tuple(obj["tokens"]),
                logprobs=tuple(float(x) for x in obj["logprobs"]),
            )
        except KeyError as exc:
            raise ValidationError(f"logprob record at line {lineno} missing field {exc}")
        _check_record(rec.tokens, rec.logprobs, rec.utterance_id, lineno)
        key = (rec.dialogue_id, rec.utterance_id)
        if corpus_tokens is not None:
            expected = corpus_tokens.get(key)
            if expected is None or tuple(expected) != rec.tokens:
                raise AlignmentError(
                    f"tokens for utterance {rec.utterance_id!r} in dialogue "
                    f"{rec.dialogue_id!r} do not match the corpus"
                )
        records[key] = rec
    return records


def import_gaze_logprobs(source) -> dict[tuple[str, str], GazeLogProbRecord]:
    """Read gaze-logprob JSONL keyed by the window's anchor utterance."""
    records: dict[tuple[str, str], GazeLogProbRecord] = {}
    for lineno, obj in _iter_jsonl(source):
        try:
            rec = GazeLogProbRecord(
                dialogue_id=obj["dialogue_id"],
                utterance_id=obj["utterance_id"],
                labels=tuple(int(x) for x in obj["labels"]),
                logprobs=tuple(float(x) for x in obj["logprobs"]),
            )
        except KeyError as exc:
            raise ValidationError(f"gaze logprob record at line {lineno} missing field {exc}")
        _check_record(rec.labels, rec.logprobs, rec.utterance_id, lineno)
        for label in rec.labels:
            if not GAZE_LABEL_MIN <= label <= GAZE_LABEL_MAX:
                raise ValidationError(f"line {lineno}: gaze label {label} out of range")
        records[(rec.dialogue_id, rec.utterance_id)] = rec
    return records


def _check_record(symbols, logprobs, utterance_id, lineno):
    if len(symbols) != len(logprobs):
        raise ValidationError(
            f"line {lineno}: utterance {utterance_id!r} has {len(symbols)} symbols "
            f"but {len(logprobs)} logprobs"
        )
    for lp in logprobs:
        if lp > 0:
            raise ValidationError(
                f"line {lineno}: positive logprob {lp} for utterance {utterance_id!r}"
            )

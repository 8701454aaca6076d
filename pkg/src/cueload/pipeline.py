"""Window quantification: four cue values per context window, normalization,
missing-value policies, and the feature-table formats.

Each window yields information value and SC/ADL over its contributing text
(explainer speech by default; ``--text-scope both`` widens it) and gaze
entropy over its aligned labels. A cue that is undefined on a window (no
gaze samples, no parsed tree, no arcs, no tokens) is flagged missing rather
than failing the run. Min-max normalization maps each cue onto [0, 1] over a
fit set, clamping out-of-range transform values and sending constant cues
to 0.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, replace

from .corpus import CODE_OF_STATE, STATE_CODES, ContextWindow
from .errors import (
    AlignmentError,
    CorpusWarning,
    MissingTreeError,
    ParseError,
    UndefinedValueError,
    ValidationError,
)
from .lm import NGramModel, gaze_entropy, information_value, mean_neg_logprob, normalize_tokens
from .syntax import average_dependency_length, syntactic_complexity, window_tree_stats

CUES = ("info_value", "gaze_entropy", "sc", "adl")
_NORM_FIELD = {cue: f"{cue}_n" for cue in CUES}

FEATURE_CSV_HEADER = (
    "window_id,dialogue_id,label,info_value,gaze_entropy,sc,adl,"
    "info_value_n,gaze_entropy_n,sc_n,adl_n,missing_mask"
)


@dataclass
class FeatureRecord:
    window_id: str
    dialogue_id: str
    label: str
    info_value: float | None = None
    gaze_entropy: float | None = None
    sc: float | None = None
    adl: float | None = None
    info_value_n: float | None = None
    gaze_entropy_n: float | None = None
    sc_n: float | None = None
    adl_n: float | None = None
    missing: frozenset = frozenset()

    @property
    def missing_mask(self) -> str:
        return "".join("1" if cue in self.missing else "0" for cue in CUES)


def window_text(window: ContextWindow, scope: str = "explainer") -> str:
    """Whitespace-joined normalized tokens of the window's contributing text."""
    tokens: list[str] = []
    for utt in window.utterances(scope):
        tokens.extend(normalize_tokens(utt))
    return " ".join(tokens)


def quantify(
    window: ContextWindow,
    word_model: NGramModel | None = None,
    gaze_model: NGramModel | None = None,
    lam: float = 0.5,
    text_scope: str = "explainer",
    word_imports: dict | None = None,
    gaze_imports: dict | None = None,
) -> FeatureRecord:
    """Compute the four cue values for one window.

    Imported logprobs take precedence over the built-in models. Word
    records are pooled per contributing utterance; the gaze record is
    looked up under the window's anchor utterance and must list exactly
    the window-aligned labels.
    """
    missing = set()
    record = FeatureRecord(
        window_id=window.window_id,
        dialogue_id=window.annotation.dialogue_id,
        label=window.annotation.state,
    )

    utts = window.utterances(text_scope)
    token_seqs = [(u, normalize_tokens(u)) for u in utts]
    token_seqs = [(u, seq) for u, seq in token_seqs if seq]

    record.info_value = _window_info_value(window, token_seqs, word_model, word_imports)
    if record.info_value is None:
        missing.add("info_value")

    record.gaze_entropy = _window_gaze_entropy(window, gaze_model, gaze_imports)
    if record.gaze_entropy is None:
        missing.add("gaze_entropy")

    try:
        stats = window_tree_stats(window, text_scope)
    except MissingTreeError:
        missing.update(("sc", "adl"))
    else:
        record.sc = syntactic_complexity(stats, lam)
        try:
            record.adl = average_dependency_length(stats)
        except UndefinedValueError:
            missing.add("adl")

    record.missing = frozenset(missing)
    return record


def _window_info_value(window, token_seqs, model, imports):
    if not token_seqs:
        return None
    if imports is not None:
        logprobs: list[float] = []
        for utt, seq in token_seqs:
            rec = imports.get((utt.dialogue_id, utt.id))
            if rec is None:
                warnings.warn(
                    f"window {window.window_id}: no imported logprobs for "
                    f"utterance {utt.id!r}; information value left missing",
                    CorpusWarning,
                )
                return None
            if tuple(seq) != rec.tokens:
                raise AlignmentError(
                    f"imported tokens for utterance {utt.id!r} do not match the corpus"
                )
            logprobs.extend(rec.logprobs)
        return mean_neg_logprob(logprobs)
    if model is None:
        return None
    total, count = 0.0, 0
    for _, seq in token_seqs:
        lps = model.sequence_logprobs(seq)
        total += sum(lps)
        count += len(lps)
    return -total / count


def _window_gaze_entropy(window, model, imports):
    labels = [s.label for s in window.gaze]
    if not labels:
        return None
    if imports is not None:
        key = (window.annotation.dialogue_id, window.annotation.utterance_id)
        rec = imports.get(key)
        if rec is None:
            warnings.warn(
                f"window {window.window_id}: no imported gaze logprobs; "
                "gaze entropy left missing",
                CorpusWarning,
            )
            return None
        if tuple(labels) != rec.labels:
            raise AlignmentError(
                f"imported gaze labels for window {window.window_id} do not match"
            )
        return mean_neg_logprob(rec.logprobs)
    if model is None:
        return None
    return gaze_entropy(labels, model)


def minmax_normalize(records, fit_indices=None) -> dict:
    """Fit min/max per cue on the selected records and transform all in place.

    fit_indices selects the fit set (default: every record); missing values
    never enter the fit. Transform clamps to [0, 1]; a constant cue maps to
    0; a cue missing everywhere in the fit set is skipped with a warning.
    Returns the fitted {cue: (min, max) | None} parameters.
    """
    records = list(records)
    fit = records if fit_indices is None else [records[i] for i in fit_indices]
    if not fit:
        raise ValidationError("empty normalization fit set")
    params: dict[str, tuple[float, float] | None] = {}
    for cue in CUES:
        values = [getattr(r, cue) for r in fit if getattr(r, cue) is not None]
        if not values:
            warnings.warn(f"cue {cue}: all fit values missing; not normalized", CorpusWarning)
            params[cue] = None
            continue
        params[cue] = (min(values), max(values))
    apply_normalization(records, params)
    return params


def apply_normalization(records, params: dict) -> None:
    for record in records:
        for cue in CUES:
            span = params.get(cue)
            raw = getattr(record, cue)
            if span is None or raw is None:
                setattr(record, _NORM_FIELD[cue], None)
                continue
            lo, hi = span
            if hi == lo:
                norm = 0.0
            else:
                norm = (raw - lo) / (hi - lo)
                norm = min(1.0, max(0.0, norm))
            setattr(record, _NORM_FIELD[cue], norm)


def impute_missing(records, policy: str = "drop", constant: float = 0.5, fit_indices=None) -> list:
    """Missing-value policy over raw and normalized cue fields.

    drop: records are returned unchanged; consumers skip per-cue None
    values (a record missing one cue still contributes its other cues).
    mean: fill each missing field with the mean of that field's present
    values, computed over fit_indices when given (training fold). constant:
    fill every missing field with the given value.
    """
    records = list(records)
    if policy == "drop":
        return records
    if policy not in ("mean", "constant"):
        raise ValidationError(f"unknown impute policy {policy!r}")
    fit = records if fit_indices is None else [records[i] for i in fit_indices]
    fields = list(CUES) + [_NORM_FIELD[c] for c in CUES]
    fills: dict[str, float] = {}
    for name in fields:
        if policy == "constant":
            fills[name] = constant
        else:
            present = [getattr(r, name) for r in fit if getattr(r, name) is not None]
            fills[name] = sum(present) / len(present) if present else constant
    out = []
    for record in records:
        updates = {
            name: fills[name]
            for name in fields
            if getattr(record, name) is None
        }
        out.append(replace(record, **updates) if updates else record)
    return out


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(value)


def records_to_csv(records) -> str:
    lines = [FEATURE_CSV_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    r.window_id,
                    r.dialogue_id,
                    r.label,
                    _fmt(r.info_value),
                    _fmt(r.gaze_entropy),
                    _fmt(r.sc),
                    _fmt(r.adl),
                    _fmt(r.info_value_n),
                    _fmt(r.gaze_entropy_n),
                    _fmt(r.sc_n),
                    _fmt(r.adl_n),
                    r.missing_mask,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def records_to_jsonl(records) -> str:
    lines = []
    for r in records:
        lines.append(
            json.dumps(
                {
                    "window_id": r.window_id,
                    "dialogue_id": r.dialogue_id,
                    "label": r.label,
                    "info_value": r.info_value,
                    "gaze_entropy": r.gaze_entropy,
                    "sc": r.sc,
                    "adl": r.adl,
                    "info_value_n": r.info_value_n,
                    "gaze_entropy_n": r.gaze_entropy_n,
                    "sc_n": r.sc_n,
                    "adl_n": r.adl_n,
                    "missing": sorted(r.missing),
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n"


def read_feature_csv(source) -> list[FeatureRecord]:
    """Inverse of records_to_csv (floats round-trip exactly via repr)."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != FEATURE_CSV_HEADER.split(","):
        raise ParseError("bad feature table header", 1)
    records = []
    for rowno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 12:
            raise ParseError(f"expected 12 fields, got {len(row)}", rowno)
        label = row[2]
        if label not in CODE_OF_STATE and label not in STATE_CODES:
            raise ValidationError(f"row {rowno}: unknown state label {label!r}")
        if label in STATE_CODES:
            label = STATE_CODES[label]
        floats = [float(v) if v else None for v in row[3:11]]
        mask = row[11]
        missing = frozenset(cue for cue, bit in zip(CUES, mask) if bit == "1")
        records.append(
            FeatureRecord(
                window_id=row[0],
                dialogue_id=row[1],
                label=label,
                info_value=floats[0],
                gaze_entropy=floats[1],
                sc=floats[2],
                adl=floats[3],
                info_value_n=floats[4],
                gaze_entropy_n=floats[5],
                sc_n=floats[6],
                adl_n=floats[7],
                missing=missing,
            )
        )
    return records


def export_tokens_jsonl(utterances) -> str:
    """Bridge-facing export: one normalized token record per utterance."""
    lines = []
    for utt in utterances:
        lines.append(
            json.dumps(
                {
                    "dialogue_id": utt.dialogue_id,
                    "utterance_id": utt.id,
                    "tokens": normalize_tokens(utt),
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n"

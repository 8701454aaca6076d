"""Corpus ingestion: CoNLL-U transcripts, gaze streams, understanding annotations.

Input formats (all UTF-8, LF):

* Transcripts: CoNLL-U, ten tab-separated columns per token line, one block
  per utterance. Each block carries ``# dialogue_id = ...``,
  ``# utterance_id = ...``, ``# speaker = Explainer|Explainee``,
  ``# start = <sec>`` and ``# end = <sec>`` metadata comments. Token-level
  times may appear in the MISC column as ``Start=<sec>|End=<sec>``.
* Gaze: CSV ``dialogue_id,time,label`` with header, labels in 1..81,
  time non-decreasing within a dialogue.
* Annotations: CSV ``dialogue_id,utterance_id,state`` with header and
  state codes U / PU / NU / MU.

Parsed structures are immutable; parsing is single pass per file.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

from .errors import (
    CorpusWarning,
    ParseError,
    ResolutionError,
    StructureError,
    ValidationError,
)

EXPLAINER = "Explainer"
EXPLAINEE = "Explainee"
SPEAKERS = (EXPLAINER, EXPLAINEE)

#: Understanding states in canonical order; classifier class indices follow it.
STATES = (
    "Understanding",
    "PartialUnderstanding",
    "NonUnderstanding",
    "Misunderstanding",
)
STATE_CODES = {"U": STATES[0], "PU": STATES[1], "NU": STATES[2], "MU": STATES[3]}
CODE_OF_STATE = {v: k for k, v in STATE_CODES.items()}

GAZE_LABEL_MIN = 1
GAZE_LABEL_MAX = 81
#: Label meaning "gaze rests on the explainer"; every other value is aversion.
GAZE_ON_EXPLAINER = 41


@dataclass(frozen=True)
class Token:
    position: int           # 1-based within the utterance
    surface: str
    head: int | None        # 0 = virtual root, None = no tree for this utterance
    deprel: str
    start_time: float | None = None
    end_time: float | None = None


@dataclass(frozen=True)
class Utterance:
    id: str
    dialogue_id: str
    speaker: str
    tokens: tuple[Token, ...]
    start_time: float
    end_time: float

    @property
    def parsed(self) -> bool:
        """True when every token carries a validated dependency head."""
        return all(t.head is not None for t in self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class GazeSample:
    time: float
    label: int


@dataclass(frozen=True)
class UnderstandingAnnotation:
    dialogue_id: str
    utterance_id: str
    state: str


@dataclass(frozen=True)
class ContextWindow:
    """An annotated utterance plus immediate neighbours and aligned gaze."""

    annotation: UnderstandingAnnotation
    curr: Utterance
    prev: Utterance | None = None
    next: Utterance | None = None
    gaze: tuple[GazeSample, ...] = field(default_factory=tuple)

    @property
    def window_id(self) -> str:
        return f"{self.annotation.dialogue_id}:{self.annotation.utterance_id}"

    @property
    def start_time(self) -> float:
        return self.prev.start_time if self.prev is not None else self.curr.start_time

    @property
    def end_time(self) -> float:
        return self.next.end_time if self.next is not None else self.curr.end_time

    def utterances(self, scope: str = "both") -> tuple[Utterance, ...]:
        """Contributing utterances in dialogue order.

        scope "explainer" keeps explainer speech only; "both" keeps all.
        """
        if scope not in ("explainer", "both"):
            raise ValueError(f"unknown scope {scope!r}")
        parts = [u for u in (self.prev, self.curr, self.next) if u is not None]
        if scope == "explainer":
            parts = [u for u in parts if u.speaker == EXPLAINER]
        return tuple(parts)


def _as_text_lines(source) -> list[str]:
    if isinstance(source, bytes):
        return source.decode("utf-8").splitlines()
    if isinstance(source, str):
        return source.splitlines()
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data.splitlines()


_REQUIRED_META = ("dialogue_id", "utterance_id", "speaker", "start", "end")


def parse_conllu(source) -> list[Utterance]:
    """Parse a CoNLL-U byte/text stream into validated utterances.

    Multi-word-token lines (id like ``1-2``) and empty-node lines (``1.1``)
    are skipped, each with one CorpusWarning. An utterance whose HEAD column
    is ``_`` anywhere is kept but flagged unparsed; a fully specified but
    invalid tree raises StructureError.
    """
    lines = _as_text_lines(source)
    utterances: list[Utterance] = []
    meta: dict[str, str] = {}
    rows: list[tuple[int, list[str]]] = []
    block_start = 0

    def flush(end_line: int) -> None:
        nonlocal meta, rows
        if not meta and not rows:
            return
        utterances.append(_build_utterance(meta, rows, block_start, end_line))
        meta, rows = {}, []

    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            flush(lineno)
            block_start = lineno
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                meta[key.strip()] = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ParseError(f"expected 10 tab-separated columns, got {len(cols)}", lineno)
        tok_id = cols[0]
        if "-" in tok_id:
            warnings.warn(f"line {lineno}: skipping multi-word token line {tok_id!r}", CorpusWarning)
            continue
        if "." in tok_id:
            warnings.warn(f"line {lineno}: skipping empty-node line {tok_id!r}", CorpusWarning)
            continue
        rows.append((lineno, cols))
    flush(len(lines))
    return utterances


def _build_utterance(meta: dict[str, str], rows, block_start: int, end_line: int) -> Utterance:
    missing = [k for k in _REQUIRED_META if k not in meta]
    if missing:
        raise ParseError(f"utterance block missing metadata {missing}", block_start + 1)
    utt_id = meta["utterance_id"]
    if meta["speaker"] not in SPEAKERS:
        raise ParseError(f"utterance {utt_id}: unknown speaker {meta['speaker']!r}", block_start + 1)
    try:
        u_start, u_end = float(meta["start"]), float(meta["end"])
    except ValueError as exc:
        raise ParseError(f"utterance {utt_id}: bad start/end time: {exc}", block_start + 1)
    if u_start > u_end:
        raise ValidationError(f"utterance {utt_id}: start {u_start} after end {u_end}")

    tokens: list[Token] = []
    for lineno, cols in rows:
        try:
            position = int(cols[0])
        except ValueError:
            raise ParseError(f"bad token id {cols[0]!r}", lineno)
        if position != len(tokens) + 1:
            raise ParseError(f"utterance {utt_id}: token ids not consecutive at {position}", lineno)
        head: int | None
        if cols[6] == "_":
            head = None
        else:
            try:
                head = int(cols[6])
            except ValueError:
                raise ParseError(f"bad head {cols[6]!r}", lineno)
            if head < 0:
                raise StructureError(f"utterance {utt_id}: negative head at token {position}")
            if head == position:
                raise StructureError(f"utterance {utt_id}: token {position} heads itself")
        t_start, t_end = _parse_misc_times(cols[9], utt_id, lineno)
        tokens.append(Token(position, cols[1], head, cols[7], t_start, t_end))

    if tokens and all(t.head is not None for t in tokens):
        _validate_tree(utt_id, tokens)
    return Utterance(
        id=utt_id,
        dialogue_id=meta["dialogue_id"],
        speaker=meta["speaker"],
        tokens=tuple(tokens),
        start_time=u_start,
        end_time=u_end,
    )


def _parse_misc_times(misc: str, utt_id: str, lineno: int):
    start = end = None
    if misc != "_":
        for part in misc.split("|"):
            if part.startswith("Start="):
                start = float(part[6:])
            elif part.startswith("End="):
                end = float(part[4:])
    if start is not None and start < 0 or end is not None and end < 0:
        raise ValidationError(f"utterance {utt_id}: negative token time at line {lineno}")
    if start is not None and end is not None and start > end:
        raise ValidationError(f"utterance {utt_id}: token start after end at line {lineno}")
    return start, end


def _validate_tree(utt_id: str, tokens: list[Token]) -> None:
    n = len(tokens)
    roots = [t.position for t in tokens if t.head == 0]
    if len(roots) != 1:
        raise StructureError(f"utterance {utt_id}: expected exactly one root, found {len(roots)}")
    heads = {t.position: t.head for t in tokens}
    for t in tokens:
        if t.head > n:
            raise StructureError(f"utterance {utt_id}: head {t.head} out of range (N={n})")
    # walk to the root from every node; more than n steps means a cycle
    for t in tokens:
        node, steps = t.position, 0
        while node != 0:
            node = heads[node]
            steps += 1
            if steps > n:
                raise StructureError(f"utterance {utt_id}: cyclic head graph")


def serialize_conllu(utterances: list[Utterance]) -> bytes:
    """Inverse of parse_conllu; re-parsing the output yields equal structures."""
    out = io.StringIO()
    for utt in utterances:
        out.write(f"# dialogue_id = {utt.dialogue_id}\n")
        out.write(f"# utterance_id = {utt.id}\n")
        out.write(f"# speaker = {utt.speaker}\n")
        out.write(f"# start = {utt.start_time!r}\n")
        out.write(f"# end = {utt.end_time!r}\n")
        for t in utt.tokens:
            misc_parts = []
            if t.start_time is not None:
                misc_parts.append(f"Start={t.start_time!r}")
            if t.end_time is not None:
                misc_parts.append(f"End={t.end_time!r}")
            misc = "|".join(misc_parts) if misc_parts else "_"
            head = "_" if t.head is None else str(t.head)
            out.write(f"{t.position}\t{t.surface}\t_\t_\t_\t_\t{head}\t{t.deprel}\t_\t{misc}\n")
        out.write("\n")
    return out.getvalue().encode("utf-8")


def parse_gaze(source) -> dict[str, list[GazeSample]]:
    """Parse the gaze CSV into per-dialogue time-sorted sample lists."""
    lines = _as_text_lines(source)
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != ["dialogue_id", "time", "label"]:
        raise ParseError(f"bad gaze header {header!r}", 1)
    per_dialogue: dict[str, list[GazeSample]] = {}
    for rowno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", rowno)
        dialogue_id, time_s, label_s = row
        try:
            time, label = float(time_s), int(label_s)
        except ValueError as exc:
            raise ParseError(f"bad gaze row: {exc}", rowno)
        if not GAZE_LABEL_MIN <= label <= GAZE_LABEL_MAX:
            raise ValidationError(
                f"row {rowno}: gaze label {label} outside "
                f"[{GAZE_LABEL_MIN}, {GAZE_LABEL_MAX}]"
            )
        samples = per_dialogue.setdefault(dialogue_id, [])
        if samples and time < samples[-1].time:
            raise ValidationError(
                f"row {rowno}: time {time} decreases within dialogue {dialogue_id}"
            )
        samples.append(GazeSample(time, label))
    return per_dialogue


def parse_annotations(source) -> list[UnderstandingAnnotation]:
    """Parse the annotation CSV; unknown state codes are rejected."""
    lines = _as_text_lines(source)
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != ["dialogue_id", "utterance_id", "state"]:
        raise ParseError(f"bad annotation header {header!r}", 1)
    annotations = []
    for rowno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", rowno)
        dialogue_id, utterance_id, code = row
        if code not in STATE_CODES:
            raise ValidationError(f"row {rowno}: unknown state {code!r}")
        annotations.append(
            UnderstandingAnnotation(dialogue_id, utterance_id, STATE_CODES[code])
        )
    return annotations


def state_counts(annotations) -> dict[str, int]:
    """Number of annotations per understanding state, in canonical order."""
    counts = {state: 0 for state in STATES}
    for ann in annotations:
        counts[ann.state] += 1
    return counts


def build_context_windows(
    utterances: list[Utterance],
    annotations: list[UnderstandingAnnotation],
    gaze: dict[str, list[GazeSample]] | None = None,
) -> list[ContextWindow]:
    """Assemble one window per annotation, with neighbours and aligned gaze.

    Neighbours are the immediately adjacent utterances of the same dialogue
    in file order and are omitted at dialogue boundaries. The gaze list
    holds every sample whose time lies in [window start, window end], both
    ends inclusive, where the span covers prev and next in full.
    """
    gaze = gaze or {}
    by_dialogue: dict[str, list[Utterance]] = {}
    for utt in utterances:
        by_dialogue.setdefault(utt.dialogue_id, []).append(utt)
    index: dict[tuple[str, str], int] = {}
    for dialogue_id, utts in by_dialogue.items():
        for i, utt in enumerate(utts):
            index[(dialogue_id, utt.id)] = i

    windows = []
    for ann in annotations:
        key = (ann.dialogue_id, ann.utterance_id)
        if key not in index:
            raise ResolutionError(
                f"annotation references missing utterance "
                f"{ann.utterance_id!r} in dialogue {ann.dialogue_id!r}"
            )
        utts = by_dialogue[ann.dialogue_id]
        i = index[key]
        prev = utts[i - 1] if i > 0 else None
        nxt = utts[i + 1] if i + 1 < len(utts) else None
        curr = utts[i]
        start = prev.start_time if prev is not None else curr.start_time
        end = nxt.end_time if nxt is not None else curr.end_time
        aligned = tuple(
            s for s in gaze.get(ann.dialogue_id, []) if start <= s.time <= end
        )
        windows.append(ContextWindow(ann, curr, prev, nxt, aligned))
    return windows

"""Synthetic dialogue corpora with controllable class signal per cue.

The generator emits the three ingestion formats (CoNLL-U transcript, gaze
CSV, annotation CSV) such that every file passes corpus validation. Each
understanding state can be pushed away from the baseline on any cue:

* info signal: later states sample tokens from a flatter distribution, so
  their mean surprisal under a corpus-trained model rises;
* sc signal: later states speak in longer utterances;
* adl signal: later states attach dependents to farther heads;
* gaze signal: later states churn gaze labels more often.

With all signals at zero the four states are exchangeable and downstream
test p-values are null-calibrated. Output is byte-deterministic per seed.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .corpus import EXPLAINEE, EXPLAINER, GAZE_ON_EXPLAINER, STATES, CODE_OF_STATE
from .errors import ValidationError

_STATE_GRADE = {state: i / (len(STATES) - 1) for i, state in enumerate(STATES)}


@dataclass(frozen=True)
class GeneratorConfig:
    n_dialogues: int = 6
    utterances_per_dialogue: int = 24
    vocab_size: int = 80
    info_signal: float = 0.0
    gaze_signal: float = 0.0
    sc_signal: float = 0.0
    adl_signal: float = 0.0
    gaze_rate_hz: float = 5.0
    state_priors: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    explainer_fraction: float = 0.8
    annotate_fraction: float = 1.0   # share of explainer utterances that anchor a window
    seed: int = 0

    def validate(self):
        if self.n_dialogues < 1 or self.utterances_per_dialogue < 1:
            raise ValidationError("dialogue and utterance counts must be positive")
        if self.vocab_size < 2:
            raise ValidationError("vocabulary size must be at least 2")
        for name in ("info_signal", "gaze_signal", "sc_signal", "adl_signal"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and >= 0")
        if self.gaze_rate_hz <= 0:
            raise ValidationError("gaze sample rate must be positive")
        if len(self.state_priors) != 4 or min(self.state_priors) < 0:
            raise ValidationError("state priors must be 4 non-negative values")
        if abs(sum(self.state_priors) - 1.0) > 1e-9:
            raise ValidationError("state priors must sum to 1")
        if not 0.0 < self.explainer_fraction <= 1.0:
            raise ValidationError("explainer fraction must be in (0, 1]")
        if not 0.0 < self.annotate_fraction <= 1.0:
            raise ValidationError("annotate fraction must be in (0, 1]")


def _allocate(total: int, priors, rng) -> list[int]:
    """Largest-remainder allocation of states to anchors, then shuffled."""
    base = [int(np.floor(p * total)) for p in priors]
    remainders = [p * total - b for p, b in zip(priors, base)]
    short = total - sum(base)
    for idx in sorted(range(4), key=lambda i: (-remainders[i], i)):
        if short <= 0:
            break
        base[idx] += 1
        short -= 1
    states = [i for i, n in enumerate(base) for _ in range(n)]
    return [int(s) for s in rng.permutation(states)]


def generate_corpus(config: GeneratorConfig) -> tuple[bytes, bytes, bytes]:
    """Emit (CoNLL-U bytes, gaze CSV bytes, annotation CSV bytes)."""
    config.validate()
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))

    vocab = [f"w{i:03d}" for i in range(config.vocab_size)]
    base_probs = 1.0 / (np.arange(config.vocab_size) + 2.0)
    base_probs /= base_probs.sum()
    uniform = np.full(config.vocab_size, 1.0 / config.vocab_size)
    quarter = max(1, config.vocab_size // 4)

    def token_dist(state: str | None) -> np.ndarray:
        if state is None:
            return base_probs
        grade = _STATE_GRADE[state]
        # flatter distribution => higher surprisal under the corpus-wide model;
        # saturating map keeps the four grades strictly ordered at any strength
        mix = config.info_signal * grade / (1.0 + config.info_signal * grade)
        dist = (1.0 - mix) * base_probs + mix * uniform
        # equal-strength preference for a state-specific vocabulary slice makes
        # the shift visible to text features without breaking exchangeability
        # of the zero-signal null
        state_idx = STATES.index(state)
        boost = np.ones(config.vocab_size)
        boost[state_idx * quarter : (state_idx + 1) * quarter] += 1.5 * config.info_signal
        dist = dist * boost
        return dist / dist.sum()

    # plan dialogues: speakers, anchor slots, state assignment
    plans = []
    anchor_slots = []
    for d in range(config.n_dialogues):
        speakers = [
            EXPLAINER if rng.random() < config.explainer_fraction else EXPLAINEE
            for _ in range(config.utterances_per_dialogue)
        ]
        if EXPLAINER not in speakers:
            speakers[0] = EXPLAINER
        plans.append(speakers)
        for u, speaker in enumerate(speakers):
            if speaker == EXPLAINER and rng.random() < config.annotate_fraction:
                anchor_slots.append((d, u))
    assigned = _allocate(len(anchor_slots), config.state_priors, rng)
    state_of = {
        slot: STATES[state_idx] for slot, state_idx in zip(anchor_slots, assigned)
    }

    conllu = io.StringIO()
    gaze_csv = io.StringIO()
    ann_csv = io.StringIO()
    gaze_csv.write("dialogue_id,time,label\n")
    ann_csv.write("dialogue_id,utterance_id,state\n")

    for d, speakers in enumerate(plans):
        dialogue_id = f"d{d:02d}"
        clock = 0.0
        spans = []  # (state or None, start, end) per utterance, for gaze
        for u, speaker in enumerate(speakers):
            utt_id = f"u{u:03d}"
            state = state_of.get((d, u))
            grade = _STATE_GRADE[state] if state is not None else 0.0

            length = int(rng.integers(3, 13)) + int(round(config.sc_signal * grade * 4))
            probs = token_dist(state)
            tokens = [vocab[int(i)] for i in rng.choice(config.vocab_size, length, p=probs)]

            far_p = min(1.0, 0.1 + config.adl_signal * grade * 0.8)
            heads = [0]
            for pos in range(2, length + 1):
                if pos == 2 or rng.random() >= far_p:
                    heads.append(pos - 1)
                else:
                    heads.append(int(rng.integers(1, pos - 1)))

            duration = 0.4 + 0.2 * length
            start, end = clock, clock + duration
            clock = end
            spans.append((state, start, end))

            conllu.write(f"# dialogue_id = {dialogue_id}\n")
            conllu.write(f"# utterance_id = {utt_id}\n")
            conllu.write(f"# speaker = {speaker}\n")
            conllu.write(f"# start = {start!r}\n")
            conllu.write(f"# end = {end!r}\n")
            step = duration / length
            for pos, (token, head) in enumerate(zip(tokens, heads), start=1):
                t0 = start + (pos - 1) * step
                t1 = start + pos * step
                rel = "root" if head == 0 else "dep"
                conllu.write(
                    f"{pos}\t{token}\t_\t_\t_\t_\t{head}\t{rel}\t_\t"
                    f"Start={t0!r}|End={t1!r}\n"
                )
            conllu.write("\n")

            if state is not None:
                ann_csv.write(f"{dialogue_id},{utt_id},{CODE_OF_STATE[state]}\n")

        # gaze track across the whole dialogue; churn follows the covering utterance
        n_samples = int(clock * config.gaze_rate_hz)
        label = GAZE_ON_EXPLAINER
        span_idx = 0
        for s in range(n_samples):
            t = (s + 0.5) / config.gaze_rate_hz
            while span_idx + 1 < len(spans) and t >= spans[span_idx][2]:
                span_idx += 1
            state = spans[span_idx][0]
            grade = _STATE_GRADE[state] if state is not None else 0.0
            churn = min(1.0, 0.05 + config.gaze_signal * grade * 0.35)
            if rng.random() < churn:
                label = int(rng.integers(1, 82))
            gaze_csv.write(f"{dialogue_id},{t!r},{label}\n")

    return (
        conllu.getvalue().encode("utf-8"),
        gaze_csv.getvalue().encode("utf-8"),
        ann_csv.getvalue().encode("utf-8"),
    )

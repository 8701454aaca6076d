import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cueload.corpus import parse_conllu
from cueload.errors import AlignmentError, UndefinedValueError, ValidationError
from cueload.lm import (
    EOS,
    UNK,
    NGramModel,
    gaze_entropy,
    import_gaze_logprobs,
    import_logprobs,
    information_value,
    mean_neg_logprob,
    normalize_token,
    normalize_tokens,
    train_gaze_ngram,
    train_word_ngram,
)
from conftest import make_conllu


def utterances_from(*token_lists, speaker="Explainer"):
    blocks = []
    for i, forms in enumerate(token_lists):
        tokens = [(form, j) for j, form in enumerate(forms)]  # chain tree
        blocks.append(("d1", f"u{i}", speaker, float(i), float(i + 1), tokens))
    return parse_conllu(make_conllu(blocks))


class TestNormalization:
    def test_lowercase_and_edge_punct(self):
        assert normalize_token("Karte,") == "karte"
        assert normalize_token("«Hallo!»") == "hallo"

    def test_word_internal_hyphen_kept(self):
        assert normalize_token("Brett-Spiel") == "brett-spiel"

    def test_pure_punctuation_drops(self):
        assert normalize_token("...") is None
        assert normalize_token("!?") is None

    def test_utterance_tokens(self):
        (utt,) = utterances_from(["Das", "Spiel", ".", "beginnt"])
        assert normalize_tokens(utt) == ["das", "spiel", "beginnt"]


class TestWordNgram:
    def test_add_k_hand_count(self):
        # corpus "a b", order 1, k=1: events {a, b, EOS, UNK}, observed a/b/EOS
        model = train_word_ngram(utterances_from(["a", "b"]), order=1, k=1.0)
        dist = model.conditional_distribution([])
        assert dist["a"] == pytest.approx(2 / 7, abs=1e-15)
        assert dist["b"] == pytest.approx(2 / 7, abs=1e-15)
        assert dist[EOS] == pytest.approx(2 / 7, abs=1e-15)
        assert dist[UNK] == pytest.approx(1 / 7, abs=1e-15)

    def test_distributions_sum_to_one(self):
        model = train_word_ngram(
            utterances_from(["a", "b", "c"], ["b", "a"], ["c", "c", "a"]), order=2, k=0.1
        )
        for ctx in ([], ["a"], ["b"], ["zzz"], ["c"]):
            assert sum(model.conditional_distribution(ctx).values()) == pytest.approx(
                1.0, abs=1e-9
            )

    def test_unseen_token_scores_as_unk(self):
        model = train_word_ngram(utterances_from(["a", "b"]), order=2, k=0.5)
        lp = model.logprob("never-seen", ["a"])
        assert math.isfinite(lp)
        assert lp < 0

    def test_empty_training_set_rejected(self):
        with pytest.raises(ValidationError, match="empty training set"):
            train_word_ngram(utterances_from(["..."]), order=2, k=0.1)

    def test_order_and_k_validated(self):
        utts = utterances_from(["a", "b"])
        with pytest.raises(ValidationError):
            train_word_ngram(utts, order=0, k=0.1)
        with pytest.raises(ValidationError):
            train_word_ngram(utts, order=2, k=0.0)

    def test_persistence_roundtrip(self, tmp_path):
        model = train_word_ngram(utterances_from(["a", "b", "a"], ["b", "b"]), order=2, k=0.3)
        path = tmp_path / "model.json"
        model.save(path)
        again = NGramModel.load(path)
        assert again.to_json() == model.to_json()
        seq = ["a", "b", "zzz"]
        assert again.sequence_logprobs(seq) == model.sequence_logprobs(seq)

    def test_persistence_header_versioned(self, tmp_path):
        model = train_word_ngram(utterances_from(["a"]), order=1, k=1.0)
        payload = json.loads(model.to_json())
        assert payload["format"] == "cueload-ngram"
        assert payload["version"] == 1
        with pytest.raises(ValidationError):
            NGramModel.from_json(json.dumps({"format": "other"}))


class TestInformationValue:
    def test_uniform_model_gives_log_vocab(self):
        # untrained model over events {a, b, EOS, UNK}: every conditional is 1/4
        model = NGramModel(order=2, k=1.0, vocabulary={"a", "b"})
        assert information_value(["a", "b"], model) == pytest.approx(math.log(4), abs=1e-12)
        assert information_value(["b"], model) == pytest.approx(math.log(4), abs=1e-12)

    def test_zero_surprisal_bound(self):
        class Deterministic:
            def sequence_logprobs(self, symbols):
                return [0.0] * len(symbols)

        assert information_value(["a", "b", "c"], Deterministic()) == 0.0

    def test_imported_mean(self):
        assert mean_neg_logprob([-0.5, -1.5]) == pytest.approx(1.0, abs=1e-15)

    def test_empty_sequence_rejected(self):
        model = NGramModel(order=1, k=1.0, vocabulary={"a"})
        with pytest.raises(UndefinedValueError):
            information_value([], model)

    def test_order1_invariant_to_reordering(self):
        model = train_word_ngram(
            utterances_from(["a", "b", "c", "a"], ["c", "b"]), order=1, k=0.2
        )
        fwd = information_value(["a", "b", "c"], model)
        rev = information_value(["c", "b", "a"], model)
        assert fwd == pytest.approx(rev, abs=1e-12)

    def test_finite_and_nonnegative(self):
        model = train_word_ngram(utterances_from(["a", "b"], ["b", "b"]), order=3, k=0.1)
        for seq in (["a"], ["zzz", "a", "b"], ["b"] * 10):
            value = information_value(seq, model)
            assert math.isfinite(value)
            assert value >= 0


class TestGazeNgram:
    def test_constant_sequence_argmax(self):
        model = train_gaze_ngram([[41] * 30], order=2, k=0.1)
        dist = model.conditional_distribution(["41"])
        assert max(dist, key=dist.get) == "41"

    def test_constant_training_beats_uniform_bound(self):
        model = train_gaze_ngram([[41] * 30], order=2, k=0.1)
        assert gaze_entropy([41, 41, 41], model) < math.log(83)

    def test_large_k_approaches_uniform(self):
        model = train_gaze_ngram([[41, 17, 41]], order=1, k=1e9)
        dist = model.conditional_distribution([])
        values = list(dist.values())
        assert len(values) == 83
        assert max(values) - min(values) < 1e-9

    def test_uniform_model_gives_log_83(self):
        model = NGramModel(order=3, k=1.0, vocabulary={str(i) for i in range(1, 82)}, kind="gaze")
        assert gaze_entropy([41, 41, 17], model) == pytest.approx(math.log(83), abs=1e-12)

    def test_single_label_direct_definition(self):
        class FixedProb:
            def sequence_logprobs(self, symbols):
                return [-2.0] * len(symbols)

        assert gaze_entropy([41], FixedProb()) == pytest.approx(2.0, abs=1e-15)

    def test_fixture_value_hand_counted(self):
        # bigram counts from [41,41,41,17] and [41,17,41,41]:
        #   ctx BOS: {41: 2}; ctx 41: {41: 3, 17: 2, EOS: 1}; ctx 17: {41: 1, EOS: 1}
        model = train_gaze_ngram([[41, 41, 41, 17], [41, 17, 41, 41]], order=2, k=0.5)
        v = 83
        expected = -(
            math.log((2 + 0.5) / (2 + 0.5 * v))
            + math.log((3 + 0.5) / (6 + 0.5 * v))
            + math.log((2 + 0.5) / (6 + 0.5 * v))
        ) / 3
        assert gaze_entropy([41, 41, 17], model) == pytest.approx(expected, abs=1e-12)

    def test_label_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            train_gaze_ngram([[41, 99]], order=2, k=0.1)

    def test_training_fits_better_than_label_permutations(self):
        rng = np.random.default_rng(7)
        sequences = []
        for _ in range(12):
            labels = [41]
            for _ in range(29):
                labels.append(labels[-1] if rng.random() < 0.8 else int(rng.integers(1, 82)))
            sequences.append(labels)
        model = train_gaze_ngram(sequences, order=3, k=0.1)
        observed = float(np.mean([model.sequence_nll(list(map(str, s))) for s in sequences]))
        pooled = [label for seq in sequences for label in seq]
        permuted_means = []
        for _ in range(20):
            shuffled = rng.permutation(pooled)
            out, i = [], 0
            for seq in sequences:
                out.append([str(x) for x in shuffled[i : i + len(seq)]])
                i += len(seq)
            permuted_means.append(float(np.mean([model.sequence_nll(s) for s in out])))
        assert observed < float(np.mean(permuted_means))


class TestImports:
    def make_records(self, logprobs=(-0.5, -1.5, -0.2), tokens=("das", "spiel", "beginnt")):
        return json.dumps(
            {
                "dialogue_id": "da",
                "utterance_id": "u1",
                "tokens": list(tokens),
                "logprobs": list(logprobs),
            }
        )

    def test_accepts_matching_record(self):
        records = import_logprobs(self.make_records())
        rec = records[("da", "u1")]
        assert len(rec.tokens) == len(rec.logprobs) == 3

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="3 symbols but 2"):
            import_logprobs(self.make_records(logprobs=(-0.5, -1.5)))

    def test_positive_logprob_rejected(self):
        with pytest.raises(ValidationError, match="positive logprob"):
            import_logprobs(self.make_records(logprobs=(-0.5, 0.2, -0.1)))

    def test_corpus_token_mismatch_names_utterance(self):
        corpus_tokens = {("da", "u1"): ["das", "andere", "beginnt"]}
        with pytest.raises(AlignmentError, match="u1"):
            import_logprobs(self.make_records(), corpus_tokens)

    def test_corpus_token_match_accepted(self):
        corpus_tokens = {("da", "u1"): ["das", "spiel", "beginnt"]}
        records = import_logprobs(self.make_records(), corpus_tokens)
        assert ("da", "u1") in records

    def test_gaze_records(self):
        line = json.dumps(
            {"dialogue_id": "da", "utterance_id": "u1", "labels": [41, 17], "logprobs": [-1.0, -2.0]}
        )
        records = import_gaze_logprobs(line)
        assert records[("da", "u1")].labels == (41, 17)

    def test_gaze_label_range_checked(self):
        line = json.dumps(
            {"dialogue_id": "da", "utterance_id": "u1", "labels": [141], "logprobs": [-1.0]}
        )
        with pytest.raises(ValidationError, match="out of range"):
            import_gaze_logprobs(line)


@settings(max_examples=30, deadline=None)
@given(
    seqs=st.lists(
        st.lists(st.integers(1, 81), min_size=1, max_size=12), min_size=1, max_size=6
    ),
    order=st.integers(1, 4),
)
def test_gaze_entropy_finite_nonnegative_property(seqs, order):
    model = train_gaze_ngram(seqs, order=order, k=0.1)
    for seq in seqs:
        value = gaze_entropy(seq, model)
        assert math.isfinite(value)
        assert value >= 0

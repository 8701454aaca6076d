import warnings

import pytest
from hypothesis import given, strategies as st

from cueload.corpus import (
    CorpusWarning,
    GazeSample,
    STATES,
    build_context_windows,
    parse_annotations,
    parse_conllu,
    parse_gaze,
    serialize_conllu,
    state_counts,
)
from cueload.errors import (
    ParseError,
    ResolutionError,
    StructureError,
    ValidationError,
)
from conftest import make_conllu


def test_minimal_two_token_tree():
    text = make_conllu([("d1", "u1", "Explainer", 0.0, 1.0, [("a", 0), ("b", 1)])])
    utts = parse_conllu(text)
    assert len(utts) == 1
    utt = utts[0]
    assert len(utt) == 2
    assert utt.tokens[0].head == 0
    assert utt.tokens[1].head == 1
    assert utt.parsed


def test_self_heading_token_rejected():
    text = make_conllu([("d1", "u1", "Explainer", 0.0, 1.0, [("a", 0), ("b", 2)])])
    with pytest.raises(StructureError, match="heads itself"):
        parse_conllu(text)


def test_toy_corpus_parses_without_warnings(toy_utterances):
    # hand-counted fixture: 12 utterances, no skippable lines
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        from pathlib import Path

        parse_conllu((Path(__file__).parent / "data" / "toy.conllu").read_bytes())
    assert len(toy_utterances) == 12
    assert not caught


def test_multiword_and_empty_node_lines_skipped_with_warning():
    lines = [
        "# dialogue_id = d1",
        "# utterance_id = u1",
        "# speaker = Explainer",
        "# start = 0.0",
        "# end = 1.0",
        "1-2\tdu's\t_\t_\t_\t_\t_\t_\t_\t_",
        "1\tdu\t_\t_\t_\t_\t2\tnsubj\t_\t_",
        "1.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_",
        "2\tgehst\t_\t_\t_\t_\t0\troot\t_\t_",
        "",
    ]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        utts = parse_conllu("\n".join(lines))
    assert len(utts) == 1
    assert len(utts[0]) == 2
    assert sum(1 for w in caught if issubclass(w.category, CorpusWarning)) == 2


def test_bad_column_count_reports_line_number():
    text = "# dialogue_id = d1\n# utterance_id = u1\n# speaker = Explainer\n# start = 0\n# end = 1\n1\ta\t_\t0\n"
    with pytest.raises(ParseError, match="line 6"):
        parse_conllu(text)


def test_cyclic_heads_rejected():
    text = make_conllu(
        [("d1", "u1", "Explainer", 0.0, 1.0, [("a", 0), ("b", 3), ("c", 2)])]
    )
    with pytest.raises(StructureError, match="cyclic"):
        parse_conllu(text)


def test_two_roots_rejected():
    text = make_conllu([("d1", "u1", "Explainer", 0.0, 1.0, [("a", 0), ("b", 0)])])
    with pytest.raises(StructureError, match="exactly one root"):
        parse_conllu(text)


def test_missing_metadata_rejected():
    text = "# dialogue_id = d1\n# utterance_id = u1\n# start = 0\n# end = 1\n1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n"
    with pytest.raises(ParseError, match="speaker"):
        parse_conllu(text)


def test_unparsed_utterance_is_flagged_not_rejected(toy_utterances):
    by_id = {(u.dialogue_id, u.id): u for u in toy_utterances}
    assert not by_id[("da", "u6")].parsed
    assert by_id[("da", "u5")].parsed


def test_token_times_parsed_from_misc(toy_utterances):
    u1 = toy_utterances[0]
    assert u1.tokens[0].start_time == 0.0
    assert u1.tokens[0].end_time == 0.4
    assert u1.tokens[4].end_time == 2.0


def test_roundtrip_serialize_reparse(toy_utterances):
    again = parse_conllu(serialize_conllu(toy_utterances))
    assert again == toy_utterances


@given(
    st.lists(
        st.tuples(st.sampled_from("abcdef"), st.floats(0, 10, allow_nan=False)),
        min_size=1,
        max_size=8,
    )
)
def test_roundtrip_property_random_chains(pairs):
    # chain trees with arbitrary surfaces and times survive a round trip
    tokens = [(form, i) for i, (form, _) in enumerate(pairs)]
    text = make_conllu([("d1", "u1", "Explainer", 0.0, float(len(pairs)), tokens)])
    utts = parse_conllu(text)
    assert parse_conllu(serialize_conllu(utts)) == utts


def test_parse_gaze_basic():
    gaze = parse_gaze("dialogue_id,time,label\nd1,0.0,41\nd1,0.1,41\n")
    assert list(gaze) == ["d1"]
    assert gaze["d1"] == [GazeSample(0.0, 41), GazeSample(0.1, 41)]


@pytest.mark.parametrize("label", [0, 82, -3])
def test_parse_gaze_label_bounds(label):
    with pytest.raises(ValidationError):
        parse_gaze(f"dialogue_id,time,label\nd1,0.0,{label}\n")


def test_parse_gaze_non_monotone_time_names_row():
    with pytest.raises(ValidationError, match="row 3"):
        parse_gaze("dialogue_id,time,label\nd1,1.0,41\nd1,0.5,41\n")


def test_parse_gaze_time_resets_between_dialogues_ok():
    gaze = parse_gaze("dialogue_id,time,label\nd1,5.0,41\nd2,0.0,41\n")
    assert len(gaze) == 2


def test_parse_annotations_basic():
    anns = parse_annotations("dialogue_id,utterance_id,state\nd1,u3,NU\n")
    assert anns[0].state == "NonUnderstanding"


def test_parse_annotations_unknown_state():
    with pytest.raises(ValidationError, match="unknown state"):
        parse_annotations("dialogue_id,utterance_id,state\nd1,u3,XX\n")


def test_state_counts_order(toy_annotations):
    counts = state_counts(toy_annotations)
    assert list(counts) == list(STATES)
    assert counts == {
        "Understanding": 2,
        "PartialUnderstanding": 1,
        "NonUnderstanding": 2,
        "Misunderstanding": 1,
    }


def test_window_count_equals_annotation_count(toy_windows, toy_annotations):
    assert len(toy_windows) == len(toy_annotations)


def test_window_boundaries(toy_windows):
    first = next(w for w in toy_windows if w.window_id == "da:u1")
    assert first.prev is None
    assert first.next.id == "u2"
    last = next(w for w in toy_windows if w.window_id == "da:u7")
    assert last.next is None
    mid = next(w for w in toy_windows if w.window_id == "da:u3")
    assert (mid.prev.id, mid.next.id) == ("u2", "u4")


def test_window_ordering_invariant(toy_windows):
    for w in toy_windows:
        if w.prev is not None:
            assert w.prev.end_time <= w.curr.start_time
        assert w.curr.start_time <= w.curr.end_time
        if w.next is not None:
            assert w.curr.end_time <= w.next.start_time


def test_gaze_alignment_interval_membership():
    # one in-range sample, one far outside the [0, 1] window
    text = make_conllu([("d1", "u1", "Explainer", 0.0, 1.0, [("a", 0), ("b", 1)])])
    utts = parse_conllu(text)
    gaze = parse_gaze("dialogue_id,time,label\nd1,0.5,41\nd1,5.0,41\n")
    anns = parse_annotations("dialogue_id,utterance_id,state\nd1,u1,U\n")
    windows = build_context_windows(utts, anns, gaze)
    assert [s.time for s in windows[0].gaze] == [0.5]


def test_gaze_alignment_is_total(toy_windows, toy_gaze):
    # every sample inside a window's span is in that window's gaze list
    for w in toy_windows:
        expected = [
            s
            for s in toy_gaze[w.annotation.dialogue_id]
            if w.start_time <= s.time <= w.end_time
        ]
        assert list(w.gaze) == expected


def test_dangling_annotation_names_ids(toy_utterances, toy_gaze):
    anns = parse_annotations("dialogue_id,utterance_id,state\nda,u99,U\n")
    with pytest.raises(ResolutionError, match="u99"):
        build_context_windows(toy_utterances, anns, toy_gaze)


def test_overlapping_windows_share_neighbours(toy_utterances, toy_gaze):
    anns = parse_annotations(
        "dialogue_id,utterance_id,state\nda,u3,U\nda,u4,PU\n"
    )
    w3, w4 = build_context_windows(toy_utterances, anns, toy_gaze)
    assert w3.next is w4.curr
    assert w4.prev is w3.curr

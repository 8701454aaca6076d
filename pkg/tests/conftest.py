import warnings
from pathlib import Path

import pytest

from cueload.corpus import (
    build_context_windows,
    parse_annotations,
    parse_conllu,
    parse_gaze,
)

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def toy_utterances():
    return parse_conllu((DATA / "toy.conllu").read_bytes())


@pytest.fixture(scope="session")
def toy_gaze():
    return parse_gaze((DATA / "toy_gaze.csv").read_bytes())


@pytest.fixture(scope="session")
def toy_annotations():
    return parse_annotations((DATA / "toy_annotations.csv").read_bytes())


@pytest.fixture(scope="session")
def toy_windows(toy_utterances, toy_annotations, toy_gaze):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_context_windows(toy_utterances, toy_annotations, toy_gaze)


def make_conllu(blocks):
    """Render utterance specs into CoNLL-U text.

    Each block is (dialogue_id, utt_id, speaker, start, end, [(form, head), ...]).
    """
    out = []
    for dialogue_id, utt_id, speaker, start, end, tokens in blocks:
        out.append(f"# dialogue_id = {dialogue_id}")
        out.append(f"# utterance_id = {utt_id}")
        out.append(f"# speaker = {speaker}")
        out.append(f"# start = {start}")
        out.append(f"# end = {end}")
        for i, (form, head) in enumerate(tokens, start=1):
            rel = "root" if head == 0 else "dep"
            out.append(f"{i}\t{form}\t_\t_\t_\t_\t{head}\t{rel}\t_\t_")
        out.append("")
    return "\n".join(out) + "\n"

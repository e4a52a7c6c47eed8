import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualground.scenegen import generate_dataset
from dualground.textsplit import (
    Label,
    NoMainObjectError,
    TokenSet,
    decouple_lines,
    label_components,
    partition_tokens,
    tokenize,
)

CHAIR = "there is a dark brown wooden chair . placed in the table of the kitchen ."


@pytest.fixture(scope="module")
def corpus():
    return generate_dataset(11, 1000)


def test_tokenize_examples():
    assert tokenize("the red chair.") == ["the", "red", "chair", "."]
    assert tokenize("  a  b ") == ["a", "b"]
    assert tokenize("The Red, Chair") == ["the", "red", ",", "chair"]
    with pytest.raises(ValueError):
        tokenize("")
    with pytest.raises(ValueError):
        tokenize("   ")


def test_worked_chair_sentence():
    toks = tokenize(CHAIR)
    labels = dict(zip(toks, label_components(toks)))
    assert labels["chair"] == Label.MAIN_OBJECT
    assert [labels[w] for w in ("dark", "brown", "wooden")] == [Label.ATTRIBUTE] * 3
    assert labels["in"] == Label.RELATIONSHIP
    assert labels["table"] == labels["kitchen"] == Label.AUXILIARY_OBJECT
    assert labels["placed"] == labels["there"] == labels["of"] == Label.OTHER
    split = TokenSet.from_utterance(CHAIR).split()
    assert {toks[i] for i in split.target_indices} == {"chair", "dark", "brown", "wooden"}
    assert {toks[i] for i in split.surrounding_indices} == {"in", "table", "kitchen"}


def test_bare_main_object():
    toks = tokenize("the chair .")
    assert label_components(toks) == [Label.OTHER, Label.MAIN_OBJECT, Label.OTHER]
    split = partition_tokens(toks, label_components(toks))
    assert split.target_indices == [1] and split.surrounding_indices == []


def test_no_category_is_an_error():
    with pytest.raises(NoMainObjectError):
        label_components(tokenize("the red thing ."))
    with pytest.raises(NoMainObjectError):
        label_components(tokenize("left of the chair ."))  # only noun sits in a relational clause
    with pytest.raises(NoMainObjectError):
        partition_tokens(["a"], [Label.OTHER])
    with pytest.raises(ValueError):
        partition_tokens(["a", "b"], [Label.MAIN_OBJECT])
    with pytest.raises(NoMainObjectError):
        TokenSet(["a"], ["Other"])


def test_generator_labels_agree_on_corpus(corpus):
    mismatches = [
        s.utterance for s in corpus if [l.value for l in label_components(tokenize(s.utterance))] != s.token_labels
    ]
    assert mismatches == []


def test_tokenize_round_trips_corpus(corpus):
    for s in corpus:
        assert " ".join(tokenize(s.utterance)) == " ".join(s.utterance.split())


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(list(Label)), min_size=1, max_size=20), st.integers(0, 19))
def test_partition_covers_each_index_once(labels, at):
    labels = list(labels)
    labels[at % len(labels)] = Label.MAIN_OBJECT
    split = partition_tokens(["w"] * len(labels), labels)
    every = sorted(split.target_indices + split.surrounding_indices + split.other_indices)
    assert every == list(range(len(labels)))
    assert split.target_indices
    for i in split.target_indices:
        assert labels[i] in (Label.MAIN_OBJECT, Label.ATTRIBUTE)
    for i in split.surrounding_indices:
        assert labels[i] in (Label.AUXILIARY_OBJECT, Label.PRONOUN, Label.RELATIONSHIP)


def test_split_is_deterministic(corpus):
    for s in corpus[:50]:
        assert TokenSet.from_utterance(s.utterance).split() == TokenSet.from_utterance(s.utterance).split()


def test_decouple_lines_format():
    out = list(decouple_lines(["the red chair .", "", "the bed left of the lamp ."]))
    assert out[0] == "the/Other\tred/Attribute\tchair/MainObject\t./Other"
    assert out[1].split("\t")[2:4] == ["left/Relationship", "of/Other"]
    assert len(out) == 2

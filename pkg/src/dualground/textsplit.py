"""Tokenisation and five-way semantic labelling of referring utterances.

Labels follow a small rule set over a fixed lexicon:

* the first category noun before any relation word is the main object;
* the run of adjectives right before it are its attributes;
* category nouns after the first relation word are auxiliary objects;
* relation words are relationships, pronouns are pronouns;
* everything else (articles, copulas, "of", punctuation, ...) is Other.

Main object and attributes feed the target branch; auxiliary objects,
pronouns and relationships feed the surrounding branch.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable


class Label(str, enum.Enum):
    MAIN_OBJECT = "MainObject"
    ATTRIBUTE = "Attribute"
    PRONOUN = "Pronoun"
    AUXILIARY_OBJECT = "AuxiliaryObject"
    RELATIONSHIP = "Relationship"
    OTHER = "Other"


TARGET_LABELS = frozenset({Label.MAIN_OBJECT, Label.ATTRIBUTE})
SURROUNDING_LABELS = frozenset({Label.AUXILIARY_OBJECT, Label.PRONOUN, Label.RELATIONSHIP})


class NoMainObjectError(ValueError):
    pass


@dataclass(frozen=True)
class Lexicon:
    categories: frozenset
    adjectives: frozenset
    relations: frozenset
    pronouns: frozenset


SCENE_CATEGORIES = (
    "bin", "bed", "sofa", "table", "chair", "plant", "shelf", "lamp", "cabinet", "door",
)
COLORS = ("red", "green", "blue", "yellow", "black", "white")

DEFAULT_LEXICON = Lexicon(
    categories=frozenset(SCENE_CATEGORIES) | {"desk", "kitchen", "room", "wall", "window", "floor"},
    adjectives=frozenset(COLORS) | {"dark", "brown", "wooden", "light", "gray", "small", "large"},
    relations=frozenset({"left", "right", "front", "behind", "near", "far", "in", "on", "under", "beside"}),
    pronouns=frozenset({"it", "this", "that", "its", "they", "which"}),
)

_TOKEN_RE = re.compile(r"[a-z0-9']+|[^\sa-z0-9']")


def tokenize(utterance: str) -> list:
    """Lowercase, split on whitespace, and split punctuation into its own tokens."""
    if not utterance or not utterance.strip():
        raise ValueError("empty utterance")
    return _TOKEN_RE.findall(utterance.lower())


def label_components(tokens, lexicon: Lexicon = DEFAULT_LEXICON) -> list:
    tokens = list(tokens)
    labels = [Label.OTHER] * len(tokens)
    first_rel = next((i for i, t in enumerate(tokens) if t in lexicon.relations), len(tokens))
    main = next((i for i in range(first_rel) if tokens[i] in lexicon.categories), None)
    if main is None:
        raise NoMainObjectError(f"no category noun before a relation in {' '.join(tokens)!r}")
    labels[main] = Label.MAIN_OBJECT
    j = main - 1
    while j >= 0 and tokens[j] in lexicon.adjectives:
        labels[j] = Label.ATTRIBUTE
        j -= 1
    for i, t in enumerate(tokens):
        if i == main:
            continue
        if t in lexicon.relations:
            labels[i] = Label.RELATIONSHIP
        elif t in lexicon.pronouns:
            labels[i] = Label.PRONOUN
        elif t in lexicon.categories:
            labels[i] = Label.AUXILIARY_OBJECT
    return labels


@dataclass
class SplitResult:
    target_indices: list
    surrounding_indices: list
    other_indices: list = field(default_factory=list)


def partition_tokens(tokens, labels) -> SplitResult:
    if len(tokens) != len(labels):
        raise ValueError("tokens and labels differ in length")
    labels = [Label(l) for l in labels]
    if Label.MAIN_OBJECT not in labels:
        raise NoMainObjectError("labels contain no MainObject")
    tgt, sur, oth = [], [], []
    for i, l in enumerate(labels):
        if l in TARGET_LABELS:
            tgt.append(i)
        elif l in SURROUNDING_LABELS:
            sur.append(i)
        else:
            oth.append(i)
    return SplitResult(tgt, sur, oth)


@dataclass
class TokenSet:
    tokens: list
    labels: list
    features: object = None  # filled by the text encoder

    def __post_init__(self):
        if len(self.tokens) != len(self.labels):
            raise ValueError("tokens and labels differ in length")
        if Label.MAIN_OBJECT not in [Label(l) for l in self.labels]:
            raise NoMainObjectError("a token set needs a MainObject")

    @classmethod
    def from_utterance(cls, utterance: str, lexicon: Lexicon = DEFAULT_LEXICON) -> "TokenSet":
        toks = tokenize(utterance)
        return cls(toks, label_components(toks, lexicon))

    def split(self) -> SplitResult:
        return partition_tokens(self.tokens, self.labels)


def format_labelled(tokens, labels) -> str:
    return "\t".join(f"{t}/{Label(l).value}" for t, l in zip(tokens, labels))


def decouple_lines(lines: Iterable[str], lexicon: Lexicon = DEFAULT_LEXICON) -> Iterable[str]:
    """One tab-separated ``token/LABEL`` line per non-blank input line."""
    for line in lines:
        if not line.strip():
            continue
        toks = tokenize(line)
        yield format_labelled(toks, label_components(toks, lexicon))

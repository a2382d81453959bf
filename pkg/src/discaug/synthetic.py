"""Synthetic review corpora with a planted sentiment lexicon.

Sentences are built from opinion clauses whose polarity comes from lexicon
adjectives, neutral fact clauses that carry no lexicon words, and
transitional compounds ``head , marker tail`` whose label follows the tail.
Lexicon words are drawn from a Zipf law, so a small minority class sees only
part of its vocabulary.  ``lexicon_label`` is the ground-truth oracle used to
measure label purity of generated samples.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from .corpus import NEG, POS, Dataset, Sample
from .segmenter import DEFAULT_MARKERS, MarkerSet, find_marker

_ASPECTS = (
    "plot", "acting", "script", "cast", "soundtrack", "pacing", "ending", "dialogue",
    "direction", "cinematography", "story", "film", "movie", "lead", "villain", "humor",
    "editing", "premise", "score", "finale", "performance", "effects", "characters", "writing",
)
_INTENSIFIERS = ("really", "very", "quite", "truly", "rather", "so", "pretty")
_FACT_TEMPLATES = (
    "we watched it on a {day}",
    "the film runs {num} minutes",
    "it was shot in {place}",
    "the {aspect} was released in {num}",
    "i saw it with my {person}",
    "it opens in {place} this {day}",
    "the {aspect} took {num} weeks to finish",
    "my {person} bought the tickets",
)
_DAYS = ("monday", "tuesday", "friday", "weekend", "sunday", "holiday")
_PLACES = ("canada", "london", "a small town", "the studio", "new york", "the desert")
_PERSONS = ("brother", "friend", "sister", "father", "cousin", "neighbor")


def _pseudo_words(rng, n, taken):
    syll = [c + v for c in "bcdfghjklmnprstvz" for v in "aeiou"]
    out = []
    while len(out) < n:
        w = "".join(rng.choice(syll, size=rng.integers(2, 4)))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


@dataclass(frozen=True)
class Lexicon:
    positive: tuple[str, ...]
    negative: tuple[str, ...]

    @classmethod
    def generate(cls, rng, size=600) -> "Lexicon":
        taken = set(DEFAULT_MARKERS) | set(_ASPECTS) | set(_INTENSIFIERS) | set(string.ascii_lowercase)
        for group in (_FACT_TEMPLATES, _DAYS, _PLACES, _PERSONS):
            taken.update(w for phrase in group for w in phrase.split())
        return cls(tuple(_pseudo_words(rng, size, taken)), tuple(_pseudo_words(rng, size, taken)))

    def score(self, tokens) -> int:
        pos = set(self.positive)
        neg = set(self.negative)
        return sum((t in pos) - (t in neg) for t in tokens)


def lexicon_label(tokens, lexicon: Lexicon, markers=None) -> int | None:
    """Oracle sentiment: the tail after an infix marker dominates; None if neutral."""
    tokens = tuple(tokens)
    at = find_marker(tokens, markers if markers is not None else MarkerSet())
    scope = tokens[at + 1:] if at is not None else tokens
    score = lexicon.score(scope)
    if score == 0:
        return None
    return POS if score > 0 else NEG


@dataclass(frozen=True)
class CorpusSpec:
    n_pos: int = 5331
    n_neg: int = 5331
    lexicon_size: int = 600
    zipf: float = 1.1
    transition_rate: float = 0.25
    neutral_head_rate: float = 0.3
    distractor_rate: float = 0.25
    label_noise: float = 0.05
    markers: tuple[str, ...] = DEFAULT_MARKERS


class Generator:
    def __init__(self, spec: CorpusSpec, lexicon: Lexicon, rng):
        self.spec = spec
        self.lexicon = lexicon
        self.rng = rng
        ranks = np.arange(1, spec.lexicon_size + 1, dtype=float)
        weights = ranks ** -spec.zipf
        self.word_p = weights / weights.sum()

    def _word(self, polarity):
        words = self.lexicon.positive if polarity == POS else self.lexicon.negative
        return words[self.rng.choice(len(words), p=self.word_p)]

    def _pick(self, options):
        return options[self.rng.integers(len(options))]

    def opinion(self, polarity) -> list[str]:
        rng = self.rng
        aspect = self._pick(_ASPECTS)
        form = rng.integers(4)
        adj = self._word(polarity)
        if form == 0:
            words = ["the", aspect, "is", adj]
        elif form == 1:
            words = ["a", adj, aspect]
        elif form == 2:
            words = ["the", aspect, "feels", self._pick(_INTENSIFIERS), adj]
        else:
            words = ["the", aspect, "is", adj, "and", self._word(polarity)]
            # two in-polarity words keep the lexicon score on the clause's side
            if rng.random() < self.spec.distractor_rate:
                words += ["despite", "a", self._word(1 - polarity), self._pick(_ASPECTS)]
        return words

    def fact(self) -> list[str]:
        template = self._pick(_FACT_TEMPLATES)
        text = template.format(
            day=self._pick(_DAYS), num=str(self.rng.integers(2, 200)), place=self._pick(_PLACES),
            aspect=self._pick(_ASPECTS), person=self._pick(_PERSONS),
        )
        return text.split()

    def sentence(self, label) -> list[str]:
        spec = self.spec
        if self.rng.random() < spec.transition_rate:
            head = self.fact() if self.rng.random() < spec.neutral_head_rate else self.opinion(1 - label)
            marker = self._pick(spec.markers)
            return head + [",", marker] + self.opinion(label)
        return self.opinion(label)

    def sample_text(self, label):
        """Tokens for a sample of class ``label``; with label noise they express the other class."""
        sentiment = 1 - label if self.rng.random() < self.spec.label_noise else label
        return self.sentence(sentiment)


def generate(spec: CorpusSpec = CorpusSpec(), seed: int = 0, name: str = "synthetic",
             lexicon: Lexicon | None = None) -> tuple[Dataset, Lexicon]:
    """Generate a corpus ordered positives first, then negatives (like pos/neg files)."""
    rng = np.random.default_rng(seed)
    if lexicon is None:
        lexicon = Lexicon.generate(np.random.default_rng([seed, 1]), spec.lexicon_size)
    gen = Generator(spec, lexicon, rng)
    samples = []
    for label, n in ((POS, spec.n_pos), (NEG, spec.n_neg)):
        for _ in range(n):
            samples.append(Sample(tuple(gen.sample_text(label)), label, len(samples)))
    return Dataset(tuple(samples), name), lexicon


def write_pair(dataset: Dataset, pos_path, neg_path) -> None:
    with open(pos_path, "w", encoding="utf-8") as pos, open(neg_path, "w", encoding="utf-8") as neg:
        for s in dataset.samples:
            (pos if s.label == POS else neg).write(s.text + "\n")

"""Transitional discourse markers: splitting compound sentences and
generating Swap / Crop augmentation candidates.

For a compound sentence ``head, marker tail`` with label ``l`` the three
candidates are::

    swap       tail , marker head    -> flip(l)
    crop_head  head                  -> flip(l)
    crop_tail  tail                  -> l
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Dataset, Sample, flip
from .text import is_content

DEFAULT_MARKERS = ("but", "although", "though", "however", "yet")
MIN_DISCOURSE_LEN = 2

SWAP = "swap"
CROP_HEAD = "crop_head"
CROP_TAIL = "crop_tail"
OPS = (SWAP, CROP_HEAD, CROP_TAIL)


@dataclass(frozen=True)
class MarkerSet:
    markers: tuple[str, ...] = DEFAULT_MARKERS

    def __post_init__(self):
        markers = tuple(self.markers)
        if not markers:
            raise ValueError("marker set is empty")
        if len(set(markers)) != len(markers):
            raise ValueError(f"duplicate markers in {markers}")
        for m in markers:
            if not m or m != m.lower() or len(m.split()) != 1:
                raise ValueError(f"markers must be single lowercase tokens, got {m!r}")
        object.__setattr__(self, "markers", markers)

    @classmethod
    def parse(cls, spec: str) -> "MarkerSet":
        """Parse a comma-separated flag value such as ``but,although``."""
        return cls(tuple(m.strip() for m in spec.split(",") if m.strip()))

    def __contains__(self, token):
        return token in self.markers

    def __iter__(self):
        return iter(self.markers)


@dataclass(frozen=True)
class DiscourseSplit:
    head: tuple[str, ...]
    marker: str
    tail: tuple[str, ...]
    source_id: int
    source_label: int


@dataclass(frozen=True)
class Candidate:
    tokens: tuple[str, ...]
    proposed_label: int
    op: str
    source_id: int


def _as_markers(markers) -> MarkerSet:
    if markers is None:
        return MarkerSet()
    if isinstance(markers, MarkerSet):
        return markers
    return MarkerSet(tuple(markers))


def find_marker(tokens: Sequence[str], markers=None) -> int | None:
    """Index of the first marker token, provided it is strictly infix.

    A sentence that opens with a marker is skipped outright.
    """
    markers = _as_markers(markers)
    if not tokens or tokens[0] in markers:
        return None
    for i, tok in enumerate(tokens):
        if tok in markers:
            return i if i <= len(tokens) - 2 else None
    return None


def _content_len(tokens: Iterable[str]) -> int:
    return sum(1 for t in tokens if is_content(t))


def split_discourse(
    sample: Sample, markers=None, min_len: int = MIN_DISCOURSE_LEN
) -> DiscourseSplit | None:
    tokens = tuple(sample.tokens)
    at = find_marker(tokens, markers)
    if at is None:
        return None
    head = tokens[:at]
    if head and head[-1] == ",":
        head = head[:-1]
    tail = tokens[at + 1:]
    if _content_len(head) < min_len or _content_len(tail) < min_len:
        return None
    return DiscourseSplit(head, tokens[at], tail, sample.id, sample.label)


def swap(head, marker, tail) -> tuple[str, ...]:
    return (*tail, ",", marker, *head)


def generate_candidates(split: DiscourseSplit) -> list[Candidate]:
    label = split.source_label
    return [
        Candidate(swap(split.head, split.marker, split.tail), flip(label), SWAP, split.source_id),
        Candidate(split.head, flip(label), CROP_HEAD, split.source_id),
        Candidate(split.tail, label, CROP_TAIL, split.source_id),
    ]


def harvest(d: Dataset, markers=None, min_len: int = MIN_DISCOURSE_LEN) -> list[Candidate]:
    """All candidates from every validly splittable sample, in dataset order."""
    markers = _as_markers(markers)
    out = []
    for sample in d.samples:
        split = split_discourse(sample, markers, min_len)
        if split is not None:
            out.extend(generate_candidates(split))
    return out

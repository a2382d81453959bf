"""Labeled corpora: loading, stratified splits, imbalance and oversampling.

Positive (1) is the majority class and negative (0) the minority class
throughout; nothing here auto-detects which class is larger when imposing
an imbalance ratio.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .text import tokenize

NEG = 0
POS = 1
LABELS = (NEG, POS)


def flip(label: int) -> int:
    if label not in LABELS:
        raise ValueError(f"not a binary label: {label!r}")
    return 1 - label


@dataclass(frozen=True)
class Sample:
    tokens: tuple[str, ...]
    label: int
    id: int

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise ValueError(f"dataset {self.name!r} has duplicate sample ids")

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def class_counts(self) -> dict[int, int]:
        counts = Counter(s.label for s in self.samples)
        return {label: counts.get(label, 0) for label in LABELS}

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def next_id(self) -> int:
        return max((s.id for s in self.samples), default=-1) + 1

    def replace(self, samples, name=None) -> "Dataset":
        return Dataset(tuple(samples), self.name if name is None else name)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


def from_pairs(pairs: Sequence[tuple[str, int]], name: str = "") -> Dataset:
    """Build a dataset from (text, label) pairs, skipping texts with no tokens."""
    samples = []
    for text, label in pairs:
        tokens = tuple(tokenize(text))
        if tokens:
            samples.append(Sample(tokens, int(label), len(samples)))
    return Dataset(tuple(samples), name)


def _read_lines(path) -> list[str]:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as exc:
        raise DataError(f"missing file: {path}") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def load_tsv(path, name: str | None = None) -> Dataset:
    pairs = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        label, sep, text = line.partition("\t")
        if not sep or label not in ("0", "1"):
            raise DataError(f"{path}:{lineno}: malformed label {label!r}")
        pairs.append((text, int(label)))
    return _finish(from_pairs(pairs, name if name is not None else Path(path).stem), path)


def load_pair(pos_path, neg_path, name: str | None = None) -> Dataset:
    """Load one-sentence-per-line positive and negative files.

    Positive lines come first, then negative lines; ids follow that order.
    """
    pairs = [(line, POS) for line in _read_lines(pos_path) if line.strip()]
    pairs += [(line, NEG) for line in _read_lines(neg_path) if line.strip()]
    if name is None:
        name = Path(pos_path).stem.removesuffix(".pos").removesuffix("-pos")
    return _finish(from_pairs(pairs, name), f"{pos_path}, {neg_path}")


def _finish(dataset: Dataset, where) -> Dataset:
    if not len(dataset):
        raise DataError(f"zero usable lines in {where}")
    return dataset


def load_dataset(source, mode: str = "tsv", name: str | None = None) -> Dataset:
    """Load a corpus; ``source`` is a path (tsv) or a (pos, neg) pair."""
    if mode == "tsv":
        return load_tsv(source, name)
    if mode == "pair":
        pos_path, neg_path = source
        return load_pair(pos_path, neg_path, name)
    raise ValueError(f"unknown dataset mode {mode!r}")


def write_tsv(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in dataset.samples:
            fh.write(f"{s.label}\t{s.text}\n")


def _by_class(d: Dataset) -> dict[int, list[Sample]]:
    groups = {label: [] for label in LABELS}
    for s in d.samples:
        groups[s.label].append(s)
    return groups


def split(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Stratified split: floor(train_fraction * n_class) per class go to train.

    Membership is drawn by a per-class shuffle seeded from ``spec.seed``;
    both halves keep the input order.
    """
    groups = _by_class(d)
    train_ids = set()
    for label, members in groups.items():
        n_train = math.floor(spec.train_fraction * len(members))
        if n_train == 0 or n_train == len(members):
            raise DataError(
                f"class {label} ({len(members)} samples) cannot be split at "
                f"fraction {spec.train_fraction}"
            )
        rng = np.random.default_rng([spec.seed, label])
        order = rng.permutation(len(members))
        train_ids.update(members[i].id for i in order[:n_train])
    train = [s for s in d.samples if s.id in train_ids]
    test = [s for s in d.samples if s.id not in train_ids]
    return d.replace(train), d.replace(test)


def make_imbalanced(train: Dataset, ir: int, seed: int) -> Dataset:
    """Keep every positive sample and floor(n_pos / ir) random negatives."""
    if int(ir) != ir or ir < 1:
        raise ValueError(f"imbalance ratio must be a positive integer, got {ir}")
    groups = _by_class(train)
    quota = len(groups[POS]) // int(ir)
    if quota < 1:
        raise DataError(f"floor({len(groups[POS])} / {ir}) leaves no negative samples")
    if quota > len(groups[NEG]):
        raise DataError(f"need {quota} negatives but only {len(groups[NEG])} available")
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(groups[NEG]), size=quota, replace=False)
    kept = groups[POS] + [groups[NEG][i] for i in picked]
    order = rng.permutation(len(kept))
    return train.replace(kept[i] for i in order)


def imbalance_ratio(d: Dataset) -> float:
    counts = d.class_counts
    lo, hi = sorted(counts.values())
    return math.inf if lo == 0 else hi / lo


def oversample(d: Dataset, seed: int) -> Dataset:
    """Duplicate random minority samples (with replacement) until balanced.

    Originals keep their place; copies are appended with fresh ids.
    """
    groups = _by_class(d)
    if not groups[NEG] or not groups[POS]:
        raise DataError(f"cannot oversample {d.name!r}: a class is empty {d.class_counts}")
    minority = min(LABELS, key=lambda label: (len(groups[label]), label))
    deficit = len(groups[flip(minority)]) - len(groups[minority])
    if deficit == 0:
        return d
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(groups[minority]), size=deficit)
    next_id = d.next_id()
    copies = [
        Sample(groups[minority][i].tokens, minority, next_id + k)
        for k, i in enumerate(picks)
    ]
    return d.replace(d.samples + tuple(copies))

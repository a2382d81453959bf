"""Tokenization, vocabularies, integer encoding and word-vector loading."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

PAD = "<pad>"
UNK = "<unk>"
PAD_ID = 0
UNK_ID = 1

_PUNCT = '.,!?;:()"“”'
_TOKEN_RE = re.compile(rf"[{re.escape(_PUNCT)}]|[^{re.escape(_PUNCT)}]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace and split off punctuation characters.

    Apostrophes stay inside tokens, so ``"Don't stop!"`` becomes
    ``["don't", "stop", "!"]``.
    """
    tokens = []
    for chunk in text.lower().split():
        tokens.extend(_TOKEN_RE.findall(chunk))
    return tokens


def is_content(token: str) -> bool:
    """True for tokens carrying at least one letter or digit."""
    return any(ch.isalnum() for ch in token)


@dataclass(frozen=True)
class Vocabulary:
    itos: tuple[str, ...]
    min_freq: int = 1
    stoi: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.itos[:2] != (PAD, UNK):
            raise ValueError("vocabulary must start with PAD, UNK")
        stoi = {tok: i for i, tok in enumerate(self.itos)}
        if len(stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")
        object.__setattr__(self, "stoi", stoi)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def index(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)


def _token_lists(data) -> list[Sequence[str]]:
    samples = getattr(data, "samples", None)
    if samples is not None:
        return [s.tokens for s in samples]
    return list(data)


def build_vocab(data, min_freq: int = 1) -> Vocabulary:
    """Build a vocabulary from a Dataset (or any iterable of token lists).

    Index order is PAD, UNK, then tokens by descending corpus frequency with
    ties broken lexicographically.
    """
    if min_freq < 1:
        raise ValueError(f"min_freq must be >= 1, got {min_freq}")
    docs = _token_lists(data)
    if not docs:
        raise DataError("cannot build a vocabulary from an empty dataset")
    counts = Counter(tok for doc in docs for tok in doc)
    counts.pop(PAD, None)
    counts.pop(UNK, None)
    kept = sorted(
        (tok for tok, n in counts.items() if n >= min_freq),
        key=lambda tok: (-counts[tok], tok),
    )
    return Vocabulary((PAD, UNK, *kept), min_freq=min_freq)


def encode(tokens: Iterable[str], vocab: Vocabulary) -> list[int]:
    return [vocab.index(tok) for tok in tokens]


def decode(indices: Iterable[int], vocab: Vocabulary) -> list[str]:
    return [vocab.itos[i] for i in indices]


@dataclass(frozen=True)
class EmbeddingTable:
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("embedding matrix has non-finite entries")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return self.matrix.shape[0]


def random_embeddings(vocab_size: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-0.1, 0.1, size=(vocab_size, dim))
    matrix[PAD_ID] = 0.0
    return matrix


def load_embeddings(
    path,
    vocab: Vocabulary,
    dim: int,
    seed: int = 0,
    allow_missing: bool = False,
) -> EmbeddingTable:
    """Load word vectors in the ``<count> <dim>`` text layout.

    Words absent from the file (including PAD and UNK) get uniform
    [-0.1, 0.1] vectors drawn from ``seed``; the PAD row is zeroed last.
    With ``allow_missing`` a missing file yields the fully random table.
    """
    matrix = np.random.default_rng(seed).uniform(-0.1, 0.1, size=(len(vocab), dim))
    if path is None or (allow_missing and not Path(path).exists()):
        matrix[PAD_ID] = 0.0
        return EmbeddingTable(matrix)
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read embedding file {path}: {exc}") from exc
    with handle:
        header = handle.readline().split()
        if len(header) != 2 or not all(h.isdigit() for h in header):
            raise DataError(f"{path}:1: malformed header, expected '<count> <dim>'")
        file_dim = int(header[1])
        if file_dim != dim:
            raise DataError(f"dim mismatch: file has {file_dim}, requested {dim}")
        for lineno, line in enumerate(handle, start=2):
            parts = line.rstrip("\n").split(" ")
            if parts and parts[-1] == "":
                parts.pop()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise DataError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
            idx = vocab.stoi.get(parts[0])
            if idx is None:
                continue
            try:
                matrix[idx] = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    matrix[PAD_ID] = 0.0
    return EmbeddingTable(matrix)

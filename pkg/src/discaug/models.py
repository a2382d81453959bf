"""Classifier suite behind one train / predict / evaluate contract.

NB and LR work on bag-of-words counts over the training vocabulary (PAD and
UNK excluded).  CNN and RNN wrap the numpy networks in ``discaug.neural``;
the attention-BiLSTM doubles as the augmentation validator.
"""

from __future__ import annotations

import copy
import enum
import logging
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.special import expit, log_softmax

from .corpus import LABELS, Dataset
from .errors import ConfigError, DataError, DivergenceError
from .neural import checkpoint
from .neural.nets import AttnBiLSTM, TextCNN, pad_batch
from .neural.optim import AdamState, adam_step, clip_grad_norm
from .text import Vocabulary, build_vocab, encode, load_embeddings

log = logging.getLogger(__name__)


class ClassifierKind(str, enum.Enum):
    NB = "nb"
    LR = "lr"
    CNN = "cnn"
    RNN = "rnn"

    @classmethod
    def parse(cls, value) -> "ClassifierKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown classifier {value!r}; choose from nb, lr, cnn, rnn") from None


@dataclass(frozen=True)
class TrainConfig:
    kind: ClassifierKind = ClassifierKind.NB
    seed: int = 0
    dim: int = 64
    hidden: int = 256
    attn_dim: int = 16
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    dropout: float = 0.0
    nb_alpha: float = 1.0
    lr_reg: float = 1.0
    lr_max_iter: int = 500
    lr_tol: float = 1e-6
    widths: tuple[int, ...] = (3, 4, 5)
    n_filters: int = 100
    min_freq: int = 1
    max_grad_norm: float = 5.0
    embeddings: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ClassifierKind.parse(self.kind))
        positive = ("dim", "hidden", "attn_dim", "epochs", "batch_size", "lr", "nb_alpha",
                    "n_filters", "min_freq", "max_grad_norm", "lr_max_iter")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr_reg < 0:
            raise ConfigError(f"lr_reg must be non-negative, got {self.lr_reg}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")

    @classmethod
    def for_kind(cls, kind, **overrides) -> "TrainConfig":
        """Defaults per classifier: BiLSTM 256 hidden; CNN 3/4/5 x 100, dropout 0.5."""
        kind = ClassifierKind.parse(kind)
        base = {"kind": kind}
        if kind is ClassifierKind.CNN:
            base["dropout"] = 0.5
        base.update(overrides)
        return cls(**base)

    @classmethod
    def validator(cls, **overrides) -> "TrainConfig":
        return cls(**{"kind": ClassifierKind.RNN, "hidden": 32, **overrides})

    def with_seed(self, seed) -> "TrainConfig":
        return replace(self, seed=int(seed))


def _tokens(item):
    return item.tokens if hasattr(item, "tokens") else item


class Classifier:
    kind: ClassifierKind
    vocab: Vocabulary

    def predict_proba(self, docs) -> np.ndarray:
        """(N, 2) class probabilities for token sequences or samples."""
        raise NotImplementedError

    def blocks(self) -> dict:
        raise NotImplementedError

    def header_dims(self):
        return (0, 0, 0, len(self.vocab))


def bag_of_words(docs, vocab: Vocabulary) -> sp.csr_matrix:
    """Count matrix over content columns (vocabulary index minus 2); OOV dropped."""
    rows, cols = [], []
    for r, doc in enumerate(docs):
        for i in encode(_tokens(doc), vocab):
            if i >= 2:
                rows.append(r)
                cols.append(i - 2)
    data = np.ones(len(rows))
    return sp.csr_matrix((data, (rows, cols)), shape=(len(docs), len(vocab) - 2))


class NaiveBayes(Classifier):
    """Multinomial NB with Laplace smoothing."""

    kind = ClassifierKind.NB

    def __init__(self, vocab, log_prior, log_likelihood, alpha=1.0):
        self.vocab = vocab
        self.log_prior = log_prior  # (2,)
        self.log_likelihood = log_likelihood  # (2, V_content)
        self.alpha = alpha

    @classmethod
    def fit(cls, d: Dataset, vocab: Vocabulary, alpha=1.0):
        X = bag_of_words(d.samples, vocab)
        y = d.labels
        counts = np.vstack([np.asarray(X[y == c].sum(axis=0)).ravel() for c in LABELS])
        n_features = counts.shape[1]
        smoothed = counts + alpha
        log_likelihood = np.log(smoothed) - np.log(counts.sum(axis=1, keepdims=True) + alpha * n_features)
        class_n = np.array([np.sum(y == c) for c in LABELS], dtype=float)
        log_prior = np.log(class_n) - np.log(class_n.sum())
        return cls(vocab, log_prior, log_likelihood, alpha)

    def likelihood(self, token: str, label: int) -> float:
        i = self.vocab.index(token)
        if i < 2:
            raise KeyError(token)
        return float(np.exp(self.log_likelihood[label, i - 2]))

    def predict_proba(self, docs):
        X = bag_of_words(docs, self.vocab)
        joint = X @ self.log_likelihood.T + self.log_prior
        return np.exp(log_softmax(joint, axis=1))

    def blocks(self):
        return {"nb.log_prior": self.log_prior, "nb.log_likelihood": self.log_likelihood,
                "nb.alpha": np.array([self.alpha])}


class LogisticRegression(Classifier):
    """L2-regularized logistic regression over bag-of-words counts.

    Minimizes summed log-loss + (reg / 2) * ||w||^2 with an unpenalized bias
    (the usual C = 1 / reg convention), scaled by 1/n.  Duplicating the
    training set and doubling ``reg`` leaves the minimizer unchanged.  The
    objective is solved with L-BFGS, stopping when the gradient norm drops
    below ``tol`` or after ``max_iter`` iterations.
    """

    kind = ClassifierKind.LR

    def __init__(self, vocab, weights, bias, n_iter=0, grad_norm=float("nan")):
        self.vocab = vocab
        self.weights = weights
        self.bias = bias
        self.n_iter = n_iter
        self.grad_norm = grad_norm

    @classmethod
    def fit(cls, d: Dataset, vocab: Vocabulary, reg=1.0, max_iter=500, tol=1e-6):
        X = bag_of_words(d.samples, vocab)
        ones = sp.csr_matrix(np.ones((X.shape[0], 1)))
        Xb = sp.hstack([X, ones], format="csr")
        y = d.labels.astype(float)
        n, p = Xb.shape
        penalty = np.full(p, reg / n)
        penalty[-1] = 0.0

        def objective(theta):
            z = Xb @ theta
            loss = np.sum(np.logaddexp(0.0, z) - y * z) / n + 0.5 * np.sum(penalty * theta * theta)
            grad = Xb.T @ (expit(z) - y) / n + penalty * theta
            return loss, grad

        # gtol bounds the max-norm, so scale it to bound the Euclidean norm
        result = minimize(objective, np.zeros(p), jac=True, method="L-BFGS-B",
                          options={"maxiter": max_iter, "gtol": tol / np.sqrt(p), "ftol": 0.0})
        theta = result.x
        grad_norm = float(np.linalg.norm(objective(theta)[1]))
        if not np.isfinite(result.fun) or not np.isfinite(grad_norm):
            raise DivergenceError(int(result.nit), "non-finite logistic-regression objective")
        return cls(vocab, theta[:-1], float(theta[-1]), int(result.nit), grad_norm)

    def predict_proba(self, docs):
        X = bag_of_words(docs, self.vocab)
        p1 = expit(X @ self.weights + self.bias)
        return np.column_stack([1.0 - p1, p1])

    def blocks(self):
        return {"lr.weights": self.weights, "lr.bias": np.array([self.bias])}


class NeuralClassifier(Classifier):
    """CNN or attention-BiLSTM over vocabulary indices."""

    def __init__(self, vocab, net, batch_size=256):
        self.vocab = vocab
        self.net = net
        self.kind = ClassifierKind(net.kind)
        self.batch_size = batch_size

    def _min_len(self):
        return max(self.net.widths) if isinstance(self.net, TextCNN) else 1

    def encode_docs(self, docs):
        seqs = [encode(_tokens(doc), self.vocab) for doc in docs]
        for s in seqs:
            if not s:
                raise DataError("cannot classify an empty token sequence")
        return seqs

    def predict_proba(self, docs):
        seqs = self.encode_docs(list(docs))
        out = np.empty((len(seqs), 2))
        for start in range(0, len(seqs), self.batch_size):
            idx, mask = pad_batch(seqs[start:start + self.batch_size], self._min_len())
            out[start:start + len(idx)] = self.net.predict_proba(idx, mask)
        return out

    def blocks(self):
        return dict(self.net.params)

    def header_dims(self):
        return self.net.dims


def _check_trainable(d: Dataset):
    counts = d.class_counts
    if min(counts.values()) == 0:
        raise DataError(f"training data {d.name!r} has a single class: {counts}")


def _fit_network(model: NeuralClassifier, d: Dataset, cfg: TrainConfig, rng, dev=None):
    net = model.net
    seqs = model.encode_docs(d.samples)
    labels = d.labels
    state = AdamState.for_params(net.params, lr=cfg.lr)
    best = None
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(seqs))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            idx, mask = pad_batch([seqs[i] for i in batch], model._min_len())
            loss, grads = net.loss_and_grads(idx, mask, labels[batch], training=True, rng=rng)
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            clip_grad_norm(grads, cfg.max_grad_norm)
            try:
                adam_step(net.params, grads, state)
            except FloatingPointError as exc:
                raise DivergenceError(epoch, str(exc)) from exc
            total += loss * len(batch)
        log.debug("%s epoch %d loss %.4f", net.kind, epoch, total / len(order))
        if dev is not None:
            acc = evaluate(model, dev)
            if best is None or acc > best[0]:
                best = (acc, copy.deepcopy(net.params))
    if best is not None:
        net.params.clear()
        net.params.update(best[1])
    return model


def train(d: Dataset, cfg: TrainConfig, dev: Dataset | None = None,
          vocab: Vocabulary | None = None) -> Classifier:
    """Train a classifier; a pure function of (d, cfg) for a given vocab.

    ``dev`` enables best-epoch selection for the neural models.
    """
    _check_trainable(d)
    vocab = vocab if vocab is not None else build_vocab(d, cfg.min_freq)
    if cfg.kind is ClassifierKind.NB:
        return NaiveBayes.fit(d, vocab, cfg.nb_alpha)
    if cfg.kind is ClassifierKind.LR:
        return LogisticRegression.fit(d, vocab, cfg.lr_reg, cfg.lr_max_iter, cfg.lr_tol)
    rng = np.random.default_rng(cfg.seed)
    emb = load_embeddings(cfg.embeddings, vocab, cfg.dim, seed=cfg.seed).matrix
    if cfg.kind is ClassifierKind.CNN:
        net = TextCNN.create(len(vocab), cfg.dim, cfg.widths, cfg.n_filters, rng,
                             embeddings=emb, dropout=cfg.dropout)
    else:
        net = AttnBiLSTM.create(len(vocab), cfg.dim, cfg.hidden, cfg.attn_dim, rng,
                                embeddings=emb, dropout=cfg.dropout)
    return _fit_network(NeuralClassifier(vocab, net), d, cfg, rng, dev)


def decide(probs) -> tuple[int, float]:
    """Argmax with ties going to label 0; returns (label, winning probability)."""
    label = 1 if probs[1] > probs[0] else 0
    return label, float(probs[label])


def predict(model: Classifier, sample) -> tuple[int, float]:
    tokens = _tokens(sample)
    if not tokens:
        raise DataError("cannot classify an empty token sequence")
    return decide(model.predict_proba([tokens])[0])


def predict_many(model: Classifier, docs) -> tuple[np.ndarray, np.ndarray]:
    docs = list(docs)
    if not docs:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    probs = model.predict_proba(docs)
    labels = (probs[:, 1] > probs[:, 0]).astype(np.int64)
    return labels, probs[np.arange(len(docs)), labels]


def accuracy_fraction(model: Classifier, test: Dataset) -> Fraction:
    if not len(test):
        raise DataError("cannot evaluate on an empty test set")
    labels, _ = predict_many(model, test.samples)
    return Fraction(int(np.sum(labels == test.labels)), len(test))


def evaluate(model: Classifier, test: Dataset) -> float:
    """Accuracy rounded to 4 decimals."""
    return round(float(accuracy_fraction(model, test)), 4)


def save_model(model: Classifier, path) -> None:
    checkpoint.save(path, model.header_dims(), model.blocks(), model.vocab.itos)


def load_model(path) -> Classifier:
    dims, blocks, tokens = checkpoint.load(path)
    if tokens is None:
        raise DataError(f"{path}: checkpoint has no vocabulary section")
    vocab = Vocabulary(tuple(tokens))
    if "nb.log_prior" in blocks:
        return NaiveBayes(vocab, blocks["nb.log_prior"].ravel(), blocks["nb.log_likelihood"],
                          float(blocks["nb.alpha"][0, 0]))
    if "lr.weights" in blocks:
        return LogisticRegression(vocab, blocks["lr.weights"].ravel(), float(blocks["lr.bias"][0, 0]))
    d, H, d_a, V = dims
    params = {}
    if "fwd.W_f" in blocks:
        template = AttnBiLSTM.create(V, d, H, d_a, np.random.default_rng(0))
    elif any(k.startswith("conv.W") for k in blocks):
        widths = sorted(int(k[len("conv.W"):]) for k in blocks if k.startswith("conv.W"))
        n_filters = blocks[f"conv.W{widths[0]}"].shape[0]
        template = TextCNN.create(V, d, widths, n_filters, np.random.default_rng(0))
    else:
        raise DataError(f"{path}: unrecognised checkpoint contents")
    for name, ref in template.params.items():
        if name not in blocks:
            raise DataError(f"{path}: missing block {name}")
        params[name] = blocks[name].reshape(ref.shape)
    template.params = params
    return NeuralClassifier(vocab, template)


"""End-to-end networks over token-index batches.

Both networks keep their weights in a flat ``params`` dict so that the
optimizer, the gradient checker and the checkpoint writer can treat them
uniformly.
"""

from __future__ import annotations

import numpy as np

from . import layers as L

PAD_ID = 0


def pad_batch(sequences, min_len=1):
    """Right-pad index sequences with PAD; returns (idx, mask)."""
    T = max(min_len, max(len(s) for s in sequences))
    idx = np.zeros((len(sequences), T), dtype=np.int64)
    mask = np.zeros((len(sequences), T), dtype=bool)
    for row, seq in enumerate(sequences):
        idx[row, :len(seq)] = seq
        mask[row, :len(seq)] = True
    return idx, mask


class Net:
    kind = ""
    params: dict

    def logits(self, idx, mask, training=False, rng=None):
        raise NotImplementedError

    def backward(self, dlogits, cache):
        raise NotImplementedError

    def predict_proba(self, idx, mask):
        logits, _ = self.logits(idx, mask, training=False)
        return L.softmax(logits)

    def loss_and_grads(self, idx, mask, labels, training=False, rng=None):
        logits, cache = self.logits(idx, mask, training=training, rng=rng)
        loss, probs, dlogits = L.softmax_xent_forward(logits, np.asarray(labels))
        return loss, self.backward(dlogits, cache)

    def loss(self, idx, mask, labels):
        logits, _ = self.logits(idx, mask, training=False)
        return L.softmax_xent_forward(logits, np.asarray(labels))[0]

    def _embed_grad(self, idx, dx):
        dE = np.zeros_like(self.params["embedding"])
        np.add.at(dE, idx.ravel(), dx.reshape(-1, dx.shape[-1]))
        return dE


class AttnBiLSTM(Net):
    """Embedding -> BiLSTM -> additive attention pooling -> softmax head."""

    kind = "rnn"

    def __init__(self, params, dropout=0.0):
        self.params = params
        self.dropout = dropout

    @classmethod
    def create(cls, vocab_size, dim, hidden, attn_dim, rng, embeddings=None,
               dropout=0.0, scale=0.08):
        if embeddings is None:
            embeddings = rng.uniform(-0.1, 0.1, size=(vocab_size, dim))
            embeddings[PAD_ID] = 0.0
        params = {"embedding": np.array(embeddings, dtype=float)}
        params.update(L.LstmParams.init(dim, hidden, rng, scale).as_dict("fwd."))
        params.update(L.LstmParams.init(dim, hidden, rng, scale).as_dict("bwd."))
        params.update(L.AttentionParams.init(2 * hidden, attn_dim, rng, scale).as_dict("attn."))
        params.update(L.HeadParams.init(2 * hidden, rng, scale=scale).as_dict("head."))
        return cls(params, dropout)

    @property
    def dims(self):
        V, d = self.params["embedding"].shape
        return d, self.params["fwd.W_f"].shape[0], self.params["attn.W_h"].shape[0], V

    def logits(self, idx, mask, training=False, rng=None):
        p = self.params
        x = p["embedding"][idx]
        fwd = L.LstmParams.from_dict(p, "fwd.")
        bwd = L.LstmParams.from_dict(p, "bwd.")
        h, c_bi = L.bilstm_forward(x, mask, fwd, bwd)
        att = L.AttentionParams.from_dict(p, "attn.")
        c, alpha, c_att = L.attention_forward(h, mask, att)
        keep = None
        if training and self.dropout > 0.0:
            keep = L.dropout_mask(c.shape, self.dropout, rng)
            c = c * keep
        logits = c @ p["head.W_s"].T + p["head.b_s"]
        return logits, (idx, c, keep, c_bi, c_att)

    def backward(self, dlogits, cache):
        idx, c, keep, c_bi, c_att = cache
        p = self.params
        grads = {"head.W_s": dlogits.T @ c, "head.b_s": dlogits.sum(axis=0)}
        dc = dlogits @ p["head.W_s"]
        if keep is not None:
            dc = dc * keep
        dh, g_att = L.attention_backward(dc, c_att)
        grads.update({"attn." + k: v for k, v in g_att.items()})
        dx, g_f, g_b = L.bilstm_backward(dh, c_bi)
        grads.update({"fwd." + k: v for k, v in g_f.items()})
        grads.update({"bwd." + k: v for k, v in g_b.items()})
        grads["embedding"] = self._embed_grad(idx, dx)
        return grads

    def attention_weights(self, idx, mask):
        p = self.params
        h, _ = L.bilstm_forward(p["embedding"][idx], mask,
                                L.LstmParams.from_dict(p, "fwd."),
                                L.LstmParams.from_dict(p, "bwd."))
        return L.attention_forward(h, mask, L.AttentionParams.from_dict(p, "attn."))[1]


class TextCNN(Net):
    """Embedding -> parallel convolutions with global max pooling -> dropout -> softmax."""

    kind = "cnn"

    def __init__(self, params, dropout=0.5):
        self.params = params
        self.dropout = dropout

    @classmethod
    def create(cls, vocab_size, dim, widths, n_filters, rng, embeddings=None,
               dropout=0.5, scale=0.08):
        if embeddings is None:
            embeddings = rng.uniform(-0.1, 0.1, size=(vocab_size, dim))
            embeddings[PAD_ID] = 0.0
        params = {"embedding": np.array(embeddings, dtype=float)}
        for w in widths:
            params[f"conv.W{w}"] = rng.uniform(-scale, scale, size=(n_filters, w, dim))
            params[f"conv.b{w}"] = np.zeros(n_filters)
        params.update(L.HeadParams.init(n_filters * len(widths), rng, scale=scale).as_dict("head."))
        return cls(params, dropout)

    @property
    def widths(self):
        return sorted(int(k[len("conv.W"):]) for k in self.params if k.startswith("conv.W"))

    @property
    def dims(self):
        V, d = self.params["embedding"].shape
        return d, 0, 0, V

    def _filters(self):
        return {w: (self.params[f"conv.W{w}"], self.params[f"conv.b{w}"]) for w in self.widths}

    def logits(self, idx, mask, training=False, rng=None):
        p = self.params
        x = p["embedding"][idx]
        feats, c_conv = L.conv_maxpool_forward(x, mask, self._filters())
        keep = None
        if training and self.dropout > 0.0:
            keep = L.dropout_mask(feats.shape, self.dropout, rng)
            feats = feats * keep
        logits = feats @ p["head.W_s"].T + p["head.b_s"]
        return logits, (idx, feats, keep, c_conv)

    def backward(self, dlogits, cache):
        idx, feats, keep, c_conv = cache
        p = self.params
        grads = {"head.W_s": dlogits.T @ feats, "head.b_s": dlogits.sum(axis=0)}
        dfeat = dlogits @ p["head.W_s"]
        if keep is not None:
            dfeat = dfeat * keep
        dx, g_conv = L.conv_maxpool_backward(dfeat, c_conv, idx.shape[1])
        for w, (dW, db) in g_conv.items():
            grads[f"conv.W{w}"] = dW
            grads[f"conv.b{w}"] = db
        grads["embedding"] = self._embed_grad(idx, dx)
        return grads
